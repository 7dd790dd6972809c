//! Quasi-static affine-body simulation with barrier contact and lagged friction.

pub mod barrier;
pub mod ccd;
pub mod contact;
pub mod friction;
pub mod mass;
mod params;
pub mod shape;
mod system;
mod trajectory;

use nalgebra::{DMatrix, SMatrix};

pub use contact::{Contact, ContactKind, ContactSet};
pub use friction::{FrictionContact, FrictionSet};
pub use mass::{compute_affine_mass, AffineMass};
pub use params::{ResolvedParams, SimParams};
pub use shape::shape_energy;
pub use system::{Body, StepContext, StepResult, System, Term};
pub use trajectory::{
    params_hash, read_trajectory, simulate_to_equilibrium, write_trajectory, FrameRecord,
    SimulateOptions, StepCache, Trajectory, TrajectoryHeader, TRAJECTORY_FORMAT,
};

/// Clamp the eigenvalues of a symmetric matrix at zero.
pub fn project_psd<const N: usize>(m: &SMatrix<f64, N, N>) -> SMatrix<f64, N, N> {
    let d = DMatrix::from_column_slice(N, N, m.as_slice());
    let p = project_psd_dyn(&d);
    SMatrix::from_column_slice(p.as_slice())
}

pub fn project_psd_dyn(m: &DMatrix<f64>) -> DMatrix<f64> {
    let sym = (m + m.transpose()) * 0.5;
    let eig = sym.clone().symmetric_eigen();
    if eig.eigenvalues.iter().all(|&l| l >= 0.0) {
        return sym;
    }
    let clamped = eig.eigenvalues.map(|l| l.max(0.0));
    &eig.eigenvectors * DMatrix::from_diagonal(&clamped) * eig.eigenvectors.transpose()
}
