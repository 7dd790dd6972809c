//! Reverse-mode differentiation of simulated trajectories with respect to
//! the initial state.
//!
//! Each step's `q_{n+1}` is a stationary point of the incremental potential,
//! so by the implicit function theorem
//! `∂q_{n+1}/∂q_n = K⁻¹ (M + Δt² H_D)` with `K` the full Hessian at `q_{n+1}`
//! and `H_D` the friction Hessian (friction depends on `q_n` only through the
//! lagged reference positions).

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::sim::contact::{normal_force, normal_force_gradient};
use crate::sim::{FrictionSet, StepContext, System, Term, Trajectory};

/// How a step Jacobian treats the friction normal forces taken from `q_n`.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub enum NormalForce {
    /// Held constant, like the tangent frames and closest-point weights.
    #[default]
    Lagged,
    /// Differentiated through the contact distances at `q_n`.
    Differentiated,
}

/// Factored pieces of one step's Jacobian.
pub struct StepJacobian {
    k: nalgebra::LU<f64, nalgebra::Dyn, nalgebra::Dyn>,
    coupling: DMatrix<f64>,
}

impl StepJacobian {
    pub fn new(
        system: &System,
        q_n: &DVector<f64>,
        q_next: &DVector<f64>,
        friction: &FrictionSet,
    ) -> Result<Self> {
        Self::with_normal_force(system, q_n, q_next, friction, NormalForce::Lagged)
    }

    pub fn with_normal_force(
        system: &System,
        q_n: &DVector<f64>,
        q_next: &DVector<f64>,
        friction: &FrictionSet,
        normal: NormalForce,
    ) -> Result<Self> {
        if q_n.len() != system.dofs() || q_next.len() != system.dofs() {
            return Err(Error::TrajectoryMismatch(
                "state size does not match scene".into(),
            ));
        }
        let ctx = StepContext {
            q_n: q_n.clone(),
            q_tilde: system.predictive(q_n),
            friction: friction.clone(),
        };
        let dt2 = system.params.dt * system.params.dt;
        let hess = |t: Term| -> Result<DMatrix<f64>> {
            Ok(system
                .term(t, q_next, &ctx, true, false)?
                .2
                .expect("hessian requested"))
        };
        let hf = hess(Term::Friction)?;
        let mut coupling = system.mass_matrix() + &hf * dt2;
        if normal == NormalForce::Differentiated && !friction.contacts.is_empty() {
            add_normal_force_coupling(system, q_n, q_next, friction, &mut coupling)?;
        }
        let k = system.mass_matrix() + (hf + hess(Term::Shape)? + hess(Term::Barrier)?) * dt2;
        let scale = k.amax();
        let lu = k.lu();
        let diag_min = lu
            .u()
            .diagonal()
            .iter()
            .fold(f64::INFINITY, |m, &d| m.min(d.abs()));
        if !(diag_min > 1e-14 * scale) {
            return Err(Error::SingularStepJacobian);
        }
        Ok(Self { k: lu, coupling })
    }

    /// `(∂q_{n+1}/∂q_n)ᵀ v`
    pub fn apply_transpose(&self, v: &DVector<f64>) -> Result<DVector<f64>> {
        let y = self.k.solve(v).ok_or(Error::SingularStepJacobian)?;
        Ok(self.coupling.tr_mul(&y))
    }

    /// `(∂q_{n+1}/∂q_n) v`
    pub fn apply(&self, v: &DVector<f64>) -> Result<DVector<f64>> {
        self.k
            .solve(&(&self.coupling * v))
            .ok_or(Error::SingularStepJacobian)
    }
}

/// `−Δt² Σ (∂∇D/∂λ) ∇λᵀ` over the friction contacts, with `λ` evaluated at `q_n`.
fn add_normal_force_coupling(
    system: &System,
    q_n: &DVector<f64>,
    q_next: &DVector<f64>,
    friction: &FrictionSet,
    coupling: &mut DMatrix<f64>,
) -> Result<()> {
    let p = &system.params;
    let dt2 = p.dt * p.dt;
    let ground = p.ground.unwrap_or(0.0);
    let (start, end) = (system.positions(q_n), system.positions(q_next));
    let mut lagged = friction.contacts.iter();
    for c in &system.contacts(q_n)?.contacts {
        let x = c.points(&start);
        if normal_force(c, &x, p.dhat, p.kappa) <= 0.0 {
            continue;
        }
        let f = lagged
            .next()
            .filter(|f| f.stencil == c.stencil)
            .ok_or_else(|| {
                Error::TrajectoryMismatch("friction data does not match contacts at q_n".into())
            })?;
        let (_, g, _) = f.energy(
            &f.stencil.map(|(b, v)| end[b][v]),
            friction.mu,
            friction.epsilon,
            false,
        );
        let dforce = system.scatter_vector(&f.stencil, f.len, &(g / f.lambda));
        let dlambda = system.scatter_vector(
            &c.stencil,
            c.len(),
            &normal_force_gradient(c, &x, p.dhat, p.kappa, &p.up, ground),
        );
        coupling.ger(-dt2, &dforce, &dlambda, 1.0);
    }
    Ok(())
}

pub fn step_jacobian_apply_transpose(
    system: &System,
    q_n: &DVector<f64>,
    q_next: &DVector<f64>,
    friction: &FrictionSet,
    v: &DVector<f64>,
) -> Result<DVector<f64>> {
    StepJacobian::new(system, q_n, q_next, friction)?.apply_transpose(v)
}

/// Pull cotangents back to `q_0`. `cotangents` holds `(frame, ∂L/∂q_frame)`
/// pairs; several entries for one frame add up.
pub fn backprop(
    system: &System,
    traj: &Trajectory,
    cotangents: &[(usize, DVector<f64>)],
) -> Result<DVector<f64>> {
    let n = system.dofs();
    if traj.states.len() != traj.steps.len() + 1 {
        return Err(Error::TrajectoryMismatch(
            "step caches do not match frames".into(),
        ));
    }
    let mut inject = vec![None::<DVector<f64>>; traj.states.len()];
    for (frame, g) in cotangents {
        if *frame >= traj.states.len() || g.len() != n {
            return Err(Error::TrajectoryMismatch(format!(
                "cotangent for frame {frame} does not fit"
            )));
        }
        if !g.iter().all(|x| x.is_finite()) {
            return Err(Error::TrajectoryMismatch(format!(
                "non-finite cotangent at frame {frame}"
            )));
        }
        match &mut inject[*frame] {
            Some(acc) => *acc += g,
            slot => *slot = Some(g.clone()),
        }
    }
    let last = traj.states.len() - 1;
    let mut lambda = inject[last].take().unwrap_or_else(|| DVector::zeros(n));
    for k in (0..last).rev() {
        if lambda.iter().any(|&x| x != 0.0) {
            let jac = StepJacobian::new(
                system,
                &traj.states[k],
                &traj.states[k + 1],
                &traj.steps[k].friction,
            )?;
            lambda = jac.apply_transpose(&lambda)?;
        }
        if let Some(g) = inject[k].take() {
            lambda += g;
        }
    }
    Ok(lambda)
}

#[cfg(test)]
mod tests {
    use std::sync::Arc;

    use nalgebra::Matrix3;

    use super::*;
    use crate::geometry::shapes::cuboid;
    use crate::geometry::Vec3;
    use crate::sim::{simulate_to_equilibrium, Body, SimParams, SimulateOptions};
    use crate::AffineState;

    fn free_cube_with(params: SimParams) -> System {
        let mesh = Arc::new(cuboid(Vec3::repeat(0.02)));
        let body = Body::new(mesh, 700.0, &Matrix3::identity()).unwrap();
        System::new(
            vec![body],
            params.resolve(Vec3::new(0.0, -9.8, 0.0), None, 0.04),
        )
    }

    fn free_cube() -> System {
        free_cube_with(SimParams::default())
    }

    #[test]
    fn force_free_step_is_identity() {
        let sys = free_cube_with(SimParams {
            shape_stiffness: 0.0,
            ..SimParams::default()
        });
        let q0 = sys.stack(&[AffineState::from_translation(Vec3::new(0.1, 0.5, 0.0))]);
        let r = sys.step(&q0).unwrap();
        let v = DVector::from_fn(12, |i, _| (i as f64 * 0.37).sin());
        let jt = step_jacobian_apply_transpose(&sys, &q0, &r.q, &r.friction, &v).unwrap();
        assert!((jt - &v).amax() < 1e-9);
        let z = step_jacobian_apply_transpose(&sys, &q0, &r.q, &r.friction, &DVector::zeros(12))
            .unwrap();
        assert_eq!(z.amax(), 0.0);
    }

    #[test]
    fn contact_free_translations_pass_through() {
        let sys = free_cube();
        let q0 = sys.stack(&[AffineState::from_translation(Vec3::new(0.1, 0.5, 0.0))]);
        let r = sys.step(&q0).unwrap();
        let jac = StepJacobian::new(&sys, &q0, &r.q, &r.friction).unwrap();
        for i in 0..3 {
            let e = DVector::from_fn(12, |k, _| if k == i { 1.0 } else { 0.0 });
            assert!((jac.apply(&e).unwrap() - &e).amax() < 1e-9);
        }
    }

    #[test]
    fn falling_body_translation_gradient_is_one() {
        let sys = free_cube();
        let q0 = sys.stack(&[AffineState::from_translation(Vec3::new(0.0, 1.0, 0.0))]);
        let opts = SimulateOptions {
            max_frames: Some(5),
            ..Default::default()
        };
        let traj = simulate_to_equilibrium(&sys, &q0, opts).unwrap();
        let mut g = DVector::zeros(12);
        g[1] = 1.0;
        let grad = backprop(&sys, &traj, &[(traj.frames() - 1, g)]).unwrap();
        assert!((grad[1] - 1.0).abs() < 1e-9);
        assert!(grad
            .iter()
            .enumerate()
            .all(|(i, x)| i == 1 || x.abs() < 1e-9));
    }
}
