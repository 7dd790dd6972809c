//! Physical plausibility metrics: scene displacement D and penetration ratio R.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{
    intersecting_triangle_pairs, transform_vertices, Aabb3, BodyGeometry, TriangleMesh, Vec3,
};
use crate::state::AffineState;

/// Mean over meshes of the longest side of each rest-pose bounding box.
pub fn mean_mesh_size(meshes: &[Arc<TriangleMesh>]) -> f64 {
    if meshes.is_empty() {
        return 0.0;
    }
    let total: f64 = meshes.iter().map(|m| m.rest_aabb().extent().max()).sum();
    total / meshes.len() as f64
}

/// Like [`mean_mesh_size`] but with each mesh under the linear part of its state.
pub fn mean_mesh_size_posed(meshes: &[Arc<TriangleMesh>], states: &[AffineState]) -> f64 {
    if meshes.is_empty() {
        return 0.0;
    }
    let total: f64 = meshes
        .iter()
        .zip(states)
        .map(|(m, s)| {
            let linear = AffineState::new(Vec3::zeros(), s.a);
            let x = transform_vertices(m, &linear);
            Aabb3::from_points(x).map_or(0.0, |b| b.extent().max())
        })
        .sum();
    total / meshes.len() as f64
}

fn posed(meshes: &[Arc<TriangleMesh>], states: &[AffineState]) -> Vec<Vec<Vec3>> {
    meshes
        .iter()
        .zip(states)
        .map(|(m, s)| transform_vertices(m, s))
        .collect()
}

fn scene_aabb(positions: &[Vec<Vec3>]) -> Option<Aabb3> {
    Aabb3::from_points(positions.iter().flatten().copied())
}

/// Diagonal of the scene bounding box.
pub fn scene_diagonal(meshes: &[Arc<TriangleMesh>], states: &[AffineState]) -> Result<f64> {
    let l = scene_aabb(&posed(meshes, states)).map_or(0.0, |b| b.diagonal());
    if !(l > 0.0) || !l.is_finite() {
        return Err(Error::ZeroExtent);
    }
    Ok(l)
}

/// Uniform scale about the origin that makes the scene diagonal 2, and the
/// scaled states.
pub fn normalize_scene(
    meshes: &[Arc<TriangleMesh>],
    states: &[AffineState],
) -> Result<(f64, Vec<AffineState>)> {
    let s = 2.0 / scene_diagonal(meshes, states)?;
    let scaled = states
        .iter()
        .map(|st| AffineState::new(st.p * s, st.a * s))
        .collect();
    Ok((s, scaled))
}

/// Unweighted mean length over every unique edge of the posed scene.
pub fn mean_edge_length(meshes: &[Arc<TriangleMesh>], states: &[AffineState]) -> f64 {
    let mut sum = 0.0;
    let mut n = 0usize;
    for (m, x) in meshes.iter().zip(posed(meshes, states)) {
        for e in m.edges() {
            sum += (x[e[1]] - x[e[0]]).norm();
            n += 1;
        }
    }
    if n == 0 {
        0.0
    } else {
        sum / n as f64
    }
}

/// Path length of every vertex over the frames, divided by vertex count and
/// the diagonal of the first frame.
pub fn scene_displacement(
    meshes: &[Arc<TriangleMesh>],
    frames: &[Vec<AffineState>],
) -> Result<f64> {
    Ok(displacement_breakdown(meshes, frames)?.0)
}

fn displacement_breakdown(
    meshes: &[Arc<TriangleMesh>],
    frames: &[Vec<AffineState>],
) -> Result<(f64, Vec<f64>, f64)> {
    let Some(first) = frames.first() else {
        return Err(Error::TrajectoryMismatch("no frames".into()));
    };
    let l = scene_diagonal(meshes, first)?;
    let vertex_count: usize = meshes.iter().map(|m| m.vertices().len()).sum();
    let mut per_object = vec![0.0; meshes.len()];
    let mut prev = posed(meshes, first);
    for states in &frames[1..] {
        let cur = posed(meshes, states);
        for (b, (xs, ys)) in prev.iter().zip(&cur).enumerate() {
            per_object[b] += xs.iter().zip(ys).map(|(x, y)| (y - x).norm()).sum::<f64>();
        }
        prev = cur;
    }
    let total: f64 = per_object.iter().sum();
    let norm = vertex_count as f64 * l;
    Ok((
        total / norm,
        per_object.iter().map(|p| p / norm).collect(),
        l,
    ))
}

/// Cross-object penetrating pair count times mean edge length over diagonal,
/// measured after normalization.
pub fn penetration_ratio(meshes: &[Arc<TriangleMesh>], states: &[AffineState]) -> Result<f64> {
    Ok(penetration_breakdown(meshes, states)?.ratio)
}

struct Penetration {
    ratio: f64,
    cross: usize,
    per_object: Vec<usize>,
    edge_length: f64,
}

fn penetration_breakdown(
    meshes: &[Arc<TriangleMesh>],
    states: &[AffineState],
) -> Result<Penetration> {
    let (_, scaled) = normalize_scene(meshes, states)?;
    let x = posed(meshes, &scaled);
    let bodies: Vec<BodyGeometry<'_>> = meshes
        .iter()
        .zip(&x)
        .map(|(m, p)| BodyGeometry::new(m, p))
        .collect();
    let count = intersecting_triangle_pairs(&bodies);
    let edge_length = mean_edge_length(meshes, &scaled);
    Ok(Penetration {
        ratio: count.cross as f64 * edge_length / 2.0,
        cross: count.cross,
        per_object: count.per_object_cross,
        edge_length,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObjectMetrics {
    pub id: String,
    /// Share of D contributed by this object's vertices.
    pub displacement: f64,
    pub penetrating_pairs: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[allow(non_snake_case)]
pub struct MetricsReport {
    pub D: f64,
    pub R: f64,
    /// Scene diagonal (m) at the first frame.
    pub diagonal: f64,
    pub mean_mesh_size: f64,
    /// Mean edge length after normalization.
    pub mean_edge_length: f64,
    pub cross_pairs: usize,
    pub frames: usize,
    pub objects: Vec<ObjectMetrics>,
}

impl MetricsReport {
    /// D over all frames, R on the last one.
    pub fn compute(
        ids: &[String],
        meshes: &[Arc<TriangleMesh>],
        frames: &[Vec<AffineState>],
    ) -> Result<Self> {
        let (d, per_d, l) = displacement_breakdown(meshes, frames)?;
        let last = frames.last().expect("checked non-empty");
        let pen = penetration_breakdown(meshes, last)?;
        Ok(Self {
            D: d,
            R: pen.ratio,
            diagonal: l,
            mean_mesh_size: mean_mesh_size_posed(meshes, &frames[0]),
            mean_edge_length: pen.edge_length,
            cross_pairs: pen.cross,
            frames: frames.len(),
            objects: ids
                .iter()
                .enumerate()
                .map(|(i, id)| ObjectMetrics {
                    id: id.clone(),
                    displacement: per_d[i],
                    penetrating_pairs: pen.per_object[i],
                })
                .collect(),
        })
    }
}
