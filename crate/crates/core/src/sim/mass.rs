use nalgebra::{Matrix3, SMatrix};

use crate::error::{Error, Result};
use crate::geometry::{TriangleMesh, Vec3};

pub type Mat12 = SMatrix<f64, 12, 12>;

/// Polynomial moments of the solid enclosed by a closed mesh.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VolumeIntegrals {
    /// ∫ 1
    pub volume: f64,
    /// ∫ x
    pub first: Vec3,
    /// ∫ x xᵀ
    pub second: Matrix3<f64>,
}

/// Moments from the signed tetrahedra fanned from the origin to each face.
pub fn volume_integrals(mesh: &TriangleMesh) -> VolumeIntegrals {
    let mut volume = 0.0;
    let mut first = Vec3::zeros();
    let mut second = Matrix3::zeros();
    for t in 0..mesh.triangles().len() {
        let [a, b, c] = mesh.triangle(t);
        let v = a.dot(&b.cross(&c)) / 6.0;
        let s = a + b + c;
        volume += v;
        first += s * (v / 4.0);
        second += (a * a.transpose() + b * b.transpose() + c * c.transpose() + s * s.transpose())
            * (v / 20.0);
    }
    VolumeIntegrals {
        volume,
        first,
        second,
    }
}

/// Density-weighted moments and the resulting 12x12 generalized mass matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct AffineMass {
    /// kg
    pub mass: f64,
    /// ∫ρ x̄ (kg·m)
    pub first: Vec3,
    /// ∫ρ x̄ x̄ᵀ (kg·m²)
    pub second: Matrix3<f64>,
    pub matrix: Mat12,
}

impl AffineMass {
    fn from_moments(mass: f64, first: Vec3, second: Matrix3<f64>) -> Self {
        let mut m = Mat12::zeros();
        for i in 0..3 {
            m[(i, i)] = mass;
            for j in 0..3 {
                m[(i, 3 + 3 * i + j)] = first[j];
                m[(3 + 3 * i + j, i)] = first[j];
                for l in 0..3 {
                    m[(3 + 3 * i + j, 3 + 3 * i + l)] = second[(j, l)];
                }
            }
        }
        Self {
            mass,
            first,
            second,
            matrix: m,
        }
    }

    /// Mass spread evenly over the vertices, for meshes that do not bound a
    /// volume. `mass` is the total (kg).
    pub fn lumped(mesh: &TriangleMesh, mass: f64) -> Self {
        let w = mass / mesh.vertices().len() as f64;
        let mut first = Vec3::zeros();
        let mut second = Matrix3::zeros();
        for v in mesh.vertices() {
            first += v * w;
            second += v * v.transpose() * w;
        }
        Self::from_moments(mass, first, second)
    }

    pub fn center_of_mass(&self) -> Vec3 {
        self.first / self.mass
    }
}

/// Exact mass matrix of a closed, outward-oriented mesh of uniform density.
pub fn compute_affine_mass(mesh: &TriangleMesh, density: f64) -> Result<AffineMass> {
    let vi = volume_integrals(mesh);
    if !mesh.is_closed_manifold() || vi.volume <= 0.0 {
        return Err(Error::NonWatertightMesh { volume: vi.volume });
    }
    Ok(AffineMass::from_moments(
        density * vi.volume,
        vi.first * density,
        vi.second * density,
    ))
}

/// Like [`compute_affine_mass`] but falls back to vertex lumping, with the
/// total mass taken from the bounding-box volume, for open meshes.
pub fn affine_mass_or_lumped(mesh: &TriangleMesh, density: f64) -> AffineMass {
    compute_affine_mass(mesh, density).unwrap_or_else(|e| {
        log::warn!("{e}; using a vertex-lumped mass");
        let ext = mesh.rest_aabb().extent();
        let volume = (ext.x * ext.y * ext.z).max(1e-12);
        AffineMass::lumped(mesh, density * volume)
    })
}
