use std::collections::{BTreeMap, BTreeSet};

use super::obj::ObjExtras;
use super::{Aabb3, Vec3};
use crate::error::{Error, Result};

/// Triangles smaller than this (m²) are rejected.
pub const MIN_TRIANGLE_AREA: f64 = 1e-12;

/// Rest-pose triangle surface of one object.
#[derive(Debug, Clone, PartialEq)]
pub struct TriangleMesh {
    vertices: Vec<Vec3>,
    triangles: Vec<[usize; 3]>,
    edges: Vec<[usize; 2]>,
    extras: Option<ObjExtras>,
}

impl TriangleMesh {
    pub fn new(vertices: Vec<Vec3>, triangles: Vec<[usize; 3]>) -> Result<Self> {
        if vertices.is_empty() {
            return Err(Error::EmptyMesh);
        }
        for (t, tri) in triangles.iter().enumerate() {
            if let Some(&bad) = tri.iter().find(|&&i| i >= vertices.len()) {
                return Err(Error::InvalidMesh(format!(
                    "triangle {t} references vertex {bad} but the mesh has {} vertices",
                    vertices.len()
                )));
            }
            let [a, b, c] = tri.map(|i| vertices[i]);
            let area = 0.5 * (b - a).cross(&(c - a)).norm();
            if !(area >= MIN_TRIANGLE_AREA) {
                return Err(Error::InvalidMesh(format!(
                    "triangle {t} has area {area:.3e} below {MIN_TRIANGLE_AREA:e}"
                )));
            }
        }
        let edges = unique_edges(&triangles);
        Ok(Self {
            vertices,
            triangles,
            edges,
            extras: None,
        })
    }

    pub(crate) fn with_extras(mut self, extras: ObjExtras) -> Self {
        self.extras = Some(extras);
        self
    }

    pub fn vertices(&self) -> &[Vec3] {
        &self.vertices
    }

    pub fn triangles(&self) -> &[[usize; 3]] {
        &self.triangles
    }

    /// Unique undirected edges, each stored with the smaller index first.
    pub fn edges(&self) -> &[[usize; 2]] {
        &self.edges
    }

    pub fn extras(&self) -> Option<&ObjExtras> {
        self.extras.as_ref()
    }

    pub fn triangle(&self, t: usize) -> [Vec3; 3] {
        self.triangles[t].map(|i| self.vertices[i])
    }

    pub fn rest_aabb(&self) -> Aabb3 {
        Aabb3::from_points(self.vertices.iter().copied()).expect("mesh is non-empty")
    }

    /// Volume enclosed by the surface via the divergence theorem. Positive for a
    /// closed, outward-oriented mesh.
    pub fn signed_volume(&self) -> f64 {
        self.triangles
            .iter()
            .map(|t| {
                let [a, b, c] = t.map(|i| self.vertices[i]);
                a.dot(&b.cross(&c)) / 6.0
            })
            .sum()
    }

    pub fn mean_edge_length(&self) -> f64 {
        if self.edges.is_empty() {
            return 0.0;
        }
        self.edge_length_sum() / self.edges.len() as f64
    }

    pub(crate) fn edge_length_sum(&self) -> f64 {
        self.edges
            .iter()
            .map(|[a, b]| (self.vertices[*a] - self.vertices[*b]).norm())
            .sum()
    }

    /// Every directed edge appears exactly once and its reverse exactly once.
    pub fn is_closed_manifold(&self) -> bool {
        let mut directed: BTreeMap<(usize, usize), usize> = BTreeMap::new();
        for t in &self.triangles {
            for k in 0..3 {
                *directed.entry((t[k], t[(k + 1) % 3])).or_default() += 1;
            }
        }
        directed
            .iter()
            .all(|(&(a, b), &n)| n == 1 && directed.get(&(b, a)) == Some(&1))
    }

    pub fn translated(&self, d: &Vec3) -> TriangleMesh {
        let mut m = self.clone();
        m.vertices.iter_mut().for_each(|v| *v += d);
        m
    }

    pub fn flipped(&self) -> TriangleMesh {
        let mut m = self.clone();
        m.triangles.iter_mut().for_each(|t| t.swap(1, 2));
        m
    }

    /// Split every triangle into four at its edge midpoints.
    pub fn subdivided(&self) -> TriangleMesh {
        let mut vertices = self.vertices.clone();
        let mut midpoint: BTreeMap<[usize; 2], usize> = BTreeMap::new();
        let mut mid = |a: usize, b: usize, vertices: &mut Vec<Vec3>| {
            let key = [a.min(b), a.max(b)];
            *midpoint.entry(key).or_insert_with(|| {
                vertices.push((vertices[a] + vertices[b]) * 0.5);
                vertices.len() - 1
            })
        };
        let mut triangles = Vec::with_capacity(self.triangles.len() * 4);
        for &[a, b, c] in &self.triangles {
            let ab = mid(a, b, &mut vertices);
            let bc = mid(b, c, &mut vertices);
            let ca = mid(c, a, &mut vertices);
            triangles.extend([[a, ab, ca], [ab, b, bc], [ca, bc, c], [ab, bc, ca]]);
        }
        TriangleMesh::new(vertices, triangles).expect("subdivision of a valid mesh is valid")
    }

    /// Concatenate several meshes into one (vertex indices are offset).
    pub fn merge(parts: &[TriangleMesh]) -> Result<TriangleMesh> {
        let mut vertices = Vec::new();
        let mut triangles = Vec::new();
        for m in parts {
            let off = vertices.len();
            vertices.extend_from_slice(&m.vertices);
            triangles.extend(m.triangles.iter().map(|t| t.map(|i| i + off)));
        }
        TriangleMesh::new(vertices, triangles)
    }
}

fn unique_edges(triangles: &[[usize; 3]]) -> Vec<[usize; 2]> {
    let set: BTreeSet<[usize; 2]> = triangles
        .iter()
        .flat_map(|t| (0..3).map(move |k| (t[k], t[(k + 1) % 3])))
        .map(|(a, b)| [a.min(b), a.max(b)])
        .collect();
    set.into_iter().collect()
}
