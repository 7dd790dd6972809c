use serde::{Deserialize, Serialize};

use crate::geometry::{UpAxis, Vec3};

/// Simulation parameters as they appear in a scene file. Length thresholds
/// left as `None` are derived from the mean mesh size of the scene.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimParams {
    /// Time step (s).
    pub dt: f64,
    /// Coulomb friction coefficient.
    pub friction_mu: f64,
    /// Physical contact stiffness (Pa) from which the barrier stiffness is derived.
    pub contact_stiffness: f64,
    /// Contact distance threshold (m). Default 0.01 × mean mesh size.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dhat: Option<f64>,
    /// Static-friction velocity threshold (m/s). Default 0.01 × mean mesh size per second.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub eps_v: Option<f64>,
    pub max_frames: usize,
    /// Velocity residual (m/s) bounding the generalized force at equilibrium.
    pub newton_tol: f64,
    /// Newton termination on ‖Δq‖∞/Δt within one step (m/s).
    pub solve_tol: f64,
    pub max_newton_iterations: usize,
    /// Per-frame ‖q_{k+1} − q_k‖∞/Δt (m/s) below which a frame counts as at rest.
    pub rest_tol: f64,
    /// Consecutive resting frames that end a simulation.
    pub rest_frames: usize,
    /// Orthogonality stiffness of the affine bodies (Pa).
    pub shape_stiffness: f64,
    /// Explicit barrier stiffness κ (N/m), overriding the derived value.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub barrier_stiffness: Option<f64>,
    pub self_contact: bool,
}

impl Default for SimParams {
    fn default() -> Self {
        Self {
            dt: 0.03,
            friction_mu: 0.2,
            contact_stiffness: 1e9,
            dhat: None,
            eps_v: None,
            max_frames: 300,
            newton_tol: 0.1,
            solve_tol: 1e-5,
            max_newton_iterations: 200,
            rest_tol: 1e-3,
            rest_frames: 3,
            shape_stiffness: 1e8,
            barrier_stiffness: None,
            self_contact: false,
        }
    }
}

impl SimParams {
    /// Tuned thresholds for tightly stacked small blocks.
    pub fn stacked_blocks() -> Self {
        Self {
            dhat: Some(5e-4),
            eps_v: Some(1e-5),
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<(), String> {
        let positive = [
            ("dt", self.dt),
            ("contact_stiffness", self.contact_stiffness),
            ("newton_tol", self.newton_tol),
            ("solve_tol", self.solve_tol),
            ("rest_tol", self.rest_tol),
            ("shape_stiffness", self.shape_stiffness),
            ("dhat", self.dhat.unwrap_or(1.0)),
            ("eps_v", self.eps_v.unwrap_or(1.0)),
            ("barrier_stiffness", self.barrier_stiffness.unwrap_or(1.0)),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(format!("sim_params.{name} must be positive, got {v}"));
            }
        }
        if !(self.friction_mu >= 0.0 && self.friction_mu.is_finite()) {
            return Err(format!(
                "sim_params.friction_mu must be non-negative, got {}",
                self.friction_mu
            ));
        }
        if self.max_frames == 0 || self.rest_frames == 0 || self.max_newton_iterations == 0 {
            return Err("sim_params counts must be at least 1".into());
        }
        Ok(())
    }

    /// Fill scene-dependent values. `mms` is the mean mesh size (m).
    pub fn resolve(&self, gravity: Vec3, ground: Option<f64>, mms: f64) -> ResolvedParams {
        let dhat = self.dhat.unwrap_or(0.01 * mms);
        let kappa = self.barrier_stiffness.unwrap_or_else(|| {
            crate::sim::barrier::stiffness_from_modulus(self.contact_stiffness, mms)
        });
        ResolvedParams {
            dt: self.dt,
            mu: self.friction_mu,
            dhat,
            eps_v: self.eps_v.unwrap_or(0.01 * mms),
            kappa,
            gravity,
            up: UpAxis::from_gravity(&gravity),
            ground,
            max_frames: self.max_frames,
            newton_tol: self.newton_tol,
            solve_tol: self.solve_tol,
            max_newton_iterations: self.max_newton_iterations,
            rest_tol: self.rest_tol,
            rest_frames: self.rest_frames,
            shape_stiffness: self.shape_stiffness,
            self_contact: self.self_contact,
        }
    }
}

/// Parameters with every scene-dependent quantity filled in.
#[derive(Debug, Clone, PartialEq)]
pub struct ResolvedParams {
    pub dt: f64,
    pub mu: f64,
    pub dhat: f64,
    pub eps_v: f64,
    pub kappa: f64,
    pub gravity: Vec3,
    pub up: UpAxis,
    /// Height of the ground plane along the up axis, if present.
    pub ground: Option<f64>,
    pub max_frames: usize,
    pub newton_tol: f64,
    pub solve_tol: f64,
    pub max_newton_iterations: usize,
    pub rest_tol: f64,
    pub rest_frames: usize,
    pub shape_stiffness: f64,
    pub self_contact: bool,
}
