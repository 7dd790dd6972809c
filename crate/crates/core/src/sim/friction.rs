//! Lagged, mollified Coulomb friction.
//!
//! Contact pairs, normal forces, closest-point weights and tangent frames are
//! all taken from the start-of-step state and held fixed during the solve.

use nalgebra::{Matrix2, SMatrix, Vector2};

use super::contact::{normal_force, ContactKind, ContactModel, ContactSet, Mat12, Vec12};
use crate::error::Result;
use crate::geometry::Vec3;

pub type Tangent = SMatrix<f64, 3, 2>;

#[derive(Debug, Clone, PartialEq)]
pub struct FrictionContact {
    pub stencil: [(usize, usize); 4],
    /// Stencil length (1 for ground contacts, else 4).
    pub len: usize,
    pub weights: [f64; 4],
    /// Orthonormal basis of the contact tangent plane.
    pub tangent: Tangent,
    /// Normal force magnitude (N).
    pub lambda: f64,
    /// Stencil positions at the start of the step.
    pub x0: [Vec3; 4],
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct FrictionSet {
    pub contacts: Vec<FrictionContact>,
    /// Coefficient of friction.
    pub mu: f64,
    /// Displacement below which friction is mollified (m).
    pub epsilon: f64,
}

fn tangent_basis(n: &Vec3) -> Tangent {
    let pick = if n.x.abs() < 0.9 {
        Vec3::x()
    } else {
        Vec3::y()
    };
    let t0 = n.cross(&pick).normalize();
    let t1 = n.cross(&t0);
    Tangent::from_columns(&[t0, t1])
}

impl FrictionSet {
    /// Freeze friction data from the contacts active at `positions`.
    pub fn lagged(
        model: &ContactModel<'_>,
        contacts: &ContactSet,
        positions: &[Vec<Vec3>],
        kappa: f64,
        mu: f64,
        epsilon: f64,
    ) -> Self {
        let mut out = Vec::new();
        if mu > 0.0 {
            for c in &contacts.contacts {
                let x = c.points(positions);
                let lambda = normal_force(c, &x, model.dhat, kappa);
                if lambda <= 0.0 {
                    continue;
                }
                let (weights, normal) = match c.kind {
                    ContactKind::Ground => ([1.0, 0.0, 0.0, 0.0], model.up.up()),
                    _ => {
                        let r = c.feature.difference(&x);
                        (c.feature.weights(), r / r.norm())
                    }
                };
                out.push(FrictionContact {
                    stencil: c.stencil,
                    len: c.len(),
                    weights,
                    tangent: tangent_basis(&normal),
                    lambda,
                    x0: x,
                });
            }
        }
        Self {
            contacts: out,
            mu,
            epsilon,
        }
    }

    pub fn from_state(
        model: &ContactModel<'_>,
        positions: &[Vec<Vec3>],
        kappa: f64,
        mu: f64,
        epsilon: f64,
    ) -> Result<Self> {
        let contacts = model.gather(positions)?;
        Ok(Self::lagged(
            model, &contacts, positions, kappa, mu, epsilon,
        ))
    }
}

/// Shifted mollified friction profile `f0` with `f0(0) = 0`, together with
/// `f1(y)/y` and the Hessian of `f0(|u|)` in the tangent plane.
fn profile(u: &Vector2<f64>, eps: f64, project: bool) -> (f64, f64, Matrix2<f64>) {
    let y = u.norm();
    if y < eps {
        let f0 = -y * y * y / (3.0 * eps * eps) + y * y / eps;
        let f1_over_y = -y / (eps * eps) + 2.0 / eps;
        let mut h = Matrix2::identity() * f1_over_y;
        if y > 0.0 {
            h -= u * u.transpose() / (eps * eps * y);
        }
        if project {
            h = super::project_psd(&h);
        }
        (f0, f1_over_y, h)
    } else {
        let uhat = u / y;
        let h = (Matrix2::identity() - uhat * uhat.transpose()) / y;
        (y - eps / 3.0, 1.0 / y, h)
    }
}

impl FrictionContact {
    pub fn slip(&self, x: &[Vec3; 4]) -> Vector2<f64> {
        let mut d = Vec3::zeros();
        for k in 0..self.len {
            d += (x[k] - self.x0[k]) * self.weights[k];
        }
        self.tangent.transpose() * d
    }

    /// Dissipative potential with gradient and Hessian over the stencil.
    pub fn energy(&self, x: &[Vec3; 4], mu: f64, eps: f64, project: bool) -> (f64, Vec12, Mat12) {
        let u = self.slip(x);
        let (f0, f1_over_y, hu) = profile(&u, eps, project);
        let scale = mu * self.lambda;
        let tu = self.tangent * u * (scale * f1_over_y);
        let th = self.tangent * hu * self.tangent.transpose() * scale;
        let mut g = Vec12::zeros();
        let mut h = Mat12::zeros();
        for k in 0..self.len {
            g.fixed_rows_mut::<3>(3 * k)
                .copy_from(&(tu * self.weights[k]));
            for l in 0..self.len {
                h.fixed_view_mut::<3, 3>(3 * k, 3 * l)
                    .copy_from(&(th * (self.weights[k] * self.weights[l])));
            }
        }
        (scale * f0, g, h)
    }
}
