use nalgebra::{Matrix3, SMatrix, SVector};

use super::project_psd;

pub type Vec9 = SVector<f64, 9>;
pub type Mat9 = SMatrix<f64, 9, 9>;

#[derive(Debug, Clone, PartialEq)]
pub struct ShapeEnergy {
    /// J
    pub value: f64,
    /// Over the linear map, row-major.
    pub gradient: Vec9,
    pub hessian: Mat9,
}

fn vec9(m: &Matrix3<f64>) -> Vec9 {
    Vec9::from_fn(|k, _| m[(k / 3, k % 3)])
}

/// Orthogonality energy `k V ‖BᵀB − I‖²` with `B = A · rest_inv`, where
/// `rest_inv` undoes the body's nominal (scaled) rest map. With `project` the
/// Hessian is clamped to be positive semi-definite.
pub fn shape_energy(
    a: &Matrix3<f64>,
    rest_inv: &Matrix3<f64>,
    volume: f64,
    stiffness: f64,
    project: bool,
) -> ShapeEnergy {
    let kv = stiffness * volume;
    let c = rest_inv;
    let b = a * c;
    let g = b.transpose() * b - Matrix3::identity();
    let value = kv * g.norm_squared();
    let d_b = b * g * (4.0 * kv);
    let gradient = vec9(&(d_b * c.transpose()));

    let mut h_b = Mat9::zeros();
    for col in 0..9 {
        let mut db = Matrix3::zeros();
        db[(col / 3, col % 3)] = 1.0;
        let dg = db.transpose() * b + b.transpose() * db;
        h_b.set_column(col, &vec9(&((db * g + b * dg) * (4.0 * kv))));
    }
    // vec(B) = L vec(A)
    let mut l = Mat9::zeros();
    for i in 0..3 {
        for j in 0..3 {
            for k in 0..3 {
                l[(3 * i + j, 3 * i + k)] = c[(k, j)];
            }
        }
    }
    let mut hessian = l.transpose() * h_b * l;
    hessian = (hessian + hessian.transpose()) * 0.5;
    if project {
        hessian = project_psd(&hessian);
    }
    ShapeEnergy {
        value,
        gradient,
        hessian,
    }
}
