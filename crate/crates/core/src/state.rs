//! Per-body affine degrees of freedom.
//!
//! A body point with rest position `x̄` sits at `A x̄ + p`. The flattened
//! coordinate vector of one body is `[p_x, p_y, p_z, A_00, A_01, ..., A_22]`
//! (translation first, then the linear map row-major), and a scene stacks
//! one such 12-vector per body.

use nalgebra::{DVector, Matrix3, SMatrix, Vector3};
use serde::{Deserialize, Serialize};

use crate::geometry::Vec3;

/// Degrees of freedom per body.
pub const BODY_DOFS: usize = 12;

/// 3x12 map from one body's coordinates to the world position of a point.
pub type PointJacobian = SMatrix<f64, 3, 12>;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AffineState {
    pub p: Vector3<f64>,
    pub a: Matrix3<f64>,
}

impl Default for AffineState {
    fn default() -> Self {
        Self::identity()
    }
}

impl AffineState {
    pub fn identity() -> Self {
        Self {
            p: Vector3::zeros(),
            a: Matrix3::identity(),
        }
    }

    pub fn new(p: Vector3<f64>, a: Matrix3<f64>) -> Self {
        Self { p, a }
    }

    pub fn from_translation(p: Vector3<f64>) -> Self {
        Self {
            p,
            a: Matrix3::identity(),
        }
    }

    #[inline]
    pub fn apply(&self, rest: &Vec3) -> Vec3 {
        self.a * rest + self.p
    }

    pub fn to_array(&self) -> [f64; BODY_DOFS] {
        let mut out = [0.0; BODY_DOFS];
        out[..3].copy_from_slice(self.p.as_slice());
        for i in 0..3 {
            for j in 0..3 {
                out[3 + 3 * i + j] = self.a[(i, j)];
            }
        }
        out
    }

    pub fn from_slice(q: &[f64]) -> Self {
        assert!(q.len() >= BODY_DOFS, "affine state needs 12 coordinates");
        let p = Vector3::new(q[0], q[1], q[2]);
        let a = Matrix3::from_fn(|i, j| q[3 + 3 * i + j]);
        Self { p, a }
    }

    /// `det(A) > 0` and every entry finite.
    pub fn is_well_formed(&self) -> bool {
        self.p.iter().chain(self.a.iter()).all(|v| v.is_finite()) && self.a.determinant() > 0.0
    }

    /// Row-major copy of the linear map.
    pub fn linear_row_major(&self) -> [f64; 9] {
        let mut out = [0.0; 9];
        for i in 0..3 {
            for j in 0..3 {
                out[3 * i + j] = self.a[(i, j)];
            }
        }
        out
    }

    pub fn from_parts(translation: [f64; 3], linear: [f64; 9]) -> Self {
        Self {
            p: Vector3::from(translation),
            a: Matrix3::from_fn(|i, j| linear[3 * i + j]),
        }
    }
}

/// Derivative of `A x̄ + p` w.r.t. the 12 body coordinates.
pub fn point_jacobian(rest: &Vec3) -> PointJacobian {
    let mut j = PointJacobian::zeros();
    for i in 0..3 {
        j[(i, i)] = 1.0;
        for k in 0..3 {
            j[(i, 3 + 3 * i + k)] = rest[k];
        }
    }
    j
}

/// Stack body states into one scene coordinate vector.
pub fn stack(states: &[AffineState]) -> DVector<f64> {
    let mut q = DVector::zeros(states.len() * BODY_DOFS);
    for (b, s) in states.iter().enumerate() {
        q.rows_mut(b * BODY_DOFS, BODY_DOFS)
            .copy_from_slice(&s.to_array());
    }
    q
}

pub fn unstack(q: &DVector<f64>) -> Vec<AffineState> {
    assert_eq!(
        q.len() % BODY_DOFS,
        0,
        "coordinate vector length must be a multiple of 12"
    );
    q.as_slice()
        .chunks_exact(BODY_DOFS)
        .map(AffineState::from_slice)
        .collect()
}

/// World position of a rest point on body `body` under stacked coordinates `q`.
#[inline]
pub fn world_point(q: &DVector<f64>, body: usize, rest: &Vec3) -> Vec3 {
    let o = body * BODY_DOFS;
    let mut x = Vec3::new(q[o], q[o + 1], q[o + 2]);
    for i in 0..3 {
        x[i] +=
            q[o + 3 + 3 * i] * rest[0] + q[o + 4 + 3 * i] * rest[1] + q[o + 5 + 3 * i] * rest[2];
    }
    x
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flatten_round_trip() {
        let s = AffineState::new(
            Vector3::new(1.0, 2.0, 3.0),
            Matrix3::new(1.0, 0.1, 0.2, 0.3, 1.1, 0.4, 0.5, 0.6, 0.9),
        );
        let q = stack(&[s, AffineState::identity()]);
        let back = unstack(&q);
        assert_eq!(back[0], s);
        assert_eq!(back[1], AffineState::identity());
        let rest = Vec3::new(0.3, -0.2, 0.7);
        assert!((world_point(&q, 0, &rest) - s.apply(&rest)).norm() < 1e-15);
    }

    #[test]
    fn jacobian_matches_apply() {
        let s = AffineState::new(
            Vector3::new(0.5, -1.0, 2.0),
            Matrix3::new(0.9, 0.1, 0.0, -0.1, 1.0, 0.2, 0.0, 0.3, 1.2),
        );
        let rest = Vec3::new(0.1, 0.2, 0.3);
        let q = nalgebra::SVector::<f64, 12>::from_column_slice(&s.to_array());
        assert!((point_jacobian(&rest) * q - s.apply(&rest)).norm() < 1e-14);
    }
}
