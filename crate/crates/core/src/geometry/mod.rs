//! Meshes, bounding boxes, distance primitives and intersection queries.

mod broad_phase;
mod distance;
mod intersect;
mod mesh;
pub mod obj;
pub mod shapes;

pub use broad_phase::{
    broad_phase, BodyGeometry, Candidates, EdgeEdgePair, PointTrianglePair, SpatialHash,
};
pub use distance::{
    edge_edge_closest, edge_edge_distance, point_triangle_closest, point_triangle_distance,
    ClosestFeature, EdgeEdgeRegion, PointTriangleRegion,
};
pub use intersect::{
    intersecting_triangle_pairs, segment_triangle_intersect, triangles_intersect, PenetrationCount,
    INTERSECTION_EPS,
};
pub use mesh::{TriangleMesh, MIN_TRIANGLE_AREA};

use nalgebra::{Vector2, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::state::AffineState;

pub type Vec3 = Vector3<f64>;
pub type Vec2 = Vector2<f64>;

/// World positions of the mesh vertices under an affine state.
pub fn transform_vertices(mesh: &TriangleMesh, state: &AffineState) -> Vec<Vec3> {
    mesh.vertices().iter().map(|v| state.apply(v)).collect()
}

/// Tight box around the transformed vertices.
pub fn compute_aabb(mesh: &TriangleMesh, state: &AffineState) -> Result<Aabb3> {
    Aabb3::from_points(mesh.vertices().iter().map(|v| state.apply(v))).ok_or(Error::EmptyMesh)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Aabb3 {
    pub min: Vec3,
    pub max: Vec3,
}

impl Aabb3 {
    pub fn new(min: Vec3, max: Vec3) -> Self {
        debug_assert!(min.iter().zip(max.iter()).all(|(a, b)| a <= b));
        Self { min, max }
    }

    pub fn from_points<I: IntoIterator<Item = Vec3>>(points: I) -> Option<Self> {
        let mut it = points.into_iter();
        let first = it.next()?;
        let (min, max) = it.fold((first, first), |(lo, hi), p| (lo.inf(&p), hi.sup(&p)));
        Some(Self { min, max })
    }

    pub fn merged(&self, other: &Aabb3) -> Aabb3 {
        Aabb3 {
            min: self.min.inf(&other.min),
            max: self.max.sup(&other.max),
        }
    }

    pub fn inflated(&self, r: f64) -> Aabb3 {
        let d = Vec3::repeat(r);
        Aabb3 {
            min: self.min - d,
            max: self.max + d,
        }
    }

    pub fn intersects(&self, other: &Aabb3) -> bool {
        (0..3).all(|i| self.min[i] <= other.max[i] && other.min[i] <= self.max[i])
    }

    pub fn contains_point(&self, p: &Vec3) -> bool {
        (0..3).all(|i| self.min[i] <= p[i] && p[i] <= self.max[i])
    }

    pub fn diagonal(&self) -> f64 {
        (self.max - self.min).norm()
    }

    pub fn extent(&self) -> Vec3 {
        self.max - self.min
    }

    pub fn translated(&self, d: &Vec3) -> Aabb3 {
        Aabb3 {
            min: self.min + d,
            max: self.max + d,
        }
    }
}

/// Axis-aligned rectangle on the horizontal plane.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Rect2 {
    pub min: Vec2,
    pub max: Vec2,
}

impl Rect2 {
    pub fn new(min: Vec2, max: Vec2) -> Self {
        debug_assert!(min.x <= max.x && min.y <= max.y);
        Self { min, max }
    }

    pub fn from_center(center: Vec2, half: Vec2) -> Self {
        Self {
            min: center - half,
            max: center + half,
        }
    }

    pub fn center(&self) -> Vec2 {
        (self.min + self.max) * 0.5
    }

    pub fn half_extents(&self) -> Vec2 {
        (self.max - self.min) * 0.5
    }

    pub fn area(&self) -> f64 {
        let e = self.max - self.min;
        e.x * e.y
    }

    pub fn translated(&self, d: &Vec2) -> Rect2 {
        Rect2 {
            min: self.min + d,
            max: self.max + d,
        }
    }

    pub fn contains_point(&self, p: &Vec2) -> bool {
        self.min.x <= p.x && p.x <= self.max.x && self.min.y <= p.y && p.y <= self.max.y
    }

    /// `self ⊆ outer`, allowing `tol` slack on every side.
    pub fn inside(&self, outer: &Rect2, tol: f64) -> bool {
        self.min.x >= outer.min.x - tol
            && self.min.y >= outer.min.y - tol
            && self.max.x <= outer.max.x + tol
            && self.max.y <= outer.max.y + tol
    }

    /// Largest per-axis separation between the two rects (negative when they overlap
    /// on both axes).
    pub fn separation(&self, other: &Rect2) -> f64 {
        let sx = (other.min.x - self.max.x).max(self.min.x - other.max.x);
        let sy = (other.min.y - self.max.y).max(self.min.y - other.max.y);
        sx.max(sy)
    }
}

/// Vertical direction of a scene, derived from its gravity vector.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct UpAxis {
    pub axis: usize,
    /// Up points along +axis (gravity along -axis).
    pub positive: bool,
}

impl UpAxis {
    /// The axis with the largest gravity component; up is opposite to gravity.
    pub fn from_gravity(g: &Vec3) -> Self {
        let axis = g.iamax();
        Self {
            axis,
            positive: g[axis] <= 0.0,
        }
    }

    pub fn y_up() -> Self {
        Self {
            axis: 1,
            positive: true,
        }
    }

    pub fn sign(&self) -> f64 {
        if self.positive {
            1.0
        } else {
            -1.0
        }
    }

    pub fn up(&self) -> Vec3 {
        let mut v = Vec3::zeros();
        v[self.axis] = self.sign();
        v
    }

    /// Indices of the two horizontal axes in increasing order.
    pub fn horizontal(&self) -> [usize; 2] {
        match self.axis {
            0 => [1, 2],
            1 => [0, 2],
            _ => [0, 1],
        }
    }

    pub fn project(&self, p: &Vec3) -> Vec2 {
        let [i, j] = self.horizontal();
        Vec2::new(p[i], p[j])
    }

    /// Lift a horizontal displacement back into 3D.
    pub fn unproject(&self, d: &Vec2) -> Vec3 {
        let [i, j] = self.horizontal();
        let mut v = Vec3::zeros();
        v[i] = d.x;
        v[j] = d.y;
        v
    }

    /// Height of the box top (the face furthest along up).
    pub fn top(&self, b: &Aabb3) -> f64 {
        if self.positive {
            b.max[self.axis]
        } else {
            -b.min[self.axis]
        }
    }

    /// Height of the box bottom.
    pub fn bottom(&self, b: &Aabb3) -> f64 {
        if self.positive {
            b.min[self.axis]
        } else {
            -b.max[self.axis]
        }
    }

    pub fn height(&self, p: &Vec3) -> f64 {
        self.sign() * p[self.axis]
    }
}

/// Drop the gravity-axis component of a box.
pub fn project_horizontal(aabb: &Aabb3, up: &UpAxis) -> Rect2 {
    Rect2 {
        min: up.project(&aabb.min),
        max: up.project(&aabb.max),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::Matrix3;

    #[test]
    fn transform_examples() {
        let mesh = shapes::cuboid(Vec3::new(0.5, 0.5, 0.5)).translated(&Vec3::repeat(0.5));
        let id = transform_vertices(&mesh, &AffineState::identity());
        assert_eq!(id, mesh.vertices());

        let shifted = AffineState::from_translation(Vec3::new(0.0, 1.0, 0.0));
        let zero = Vec3::zeros();
        assert_eq!(shifted.apply(&zero), Vec3::new(0.0, 1.0, 0.0));

        let scaled = AffineState::new(Vec3::zeros(), Matrix3::identity() * 2.0);
        assert_eq!(scaled.apply(&Vec3::repeat(1.0)), Vec3::repeat(2.0));
    }

    #[test]
    fn aabb_examples() {
        let cube = shapes::cuboid(Vec3::repeat(0.5)).translated(&Vec3::repeat(0.5));
        let b = compute_aabb(&cube, &AffineState::identity()).unwrap();
        assert_eq!(b.min, Vec3::zeros());
        assert_eq!(b.max, Vec3::repeat(1.0));
        let b = compute_aabb(
            &cube,
            &AffineState::from_translation(Vec3::new(0.0, 2.0, 0.0)),
        )
        .unwrap();
        assert_eq!(b.min, Vec3::new(0.0, 2.0, 0.0));
        assert_eq!(b.max, Vec3::new(1.0, 3.0, 1.0));
    }

    #[test]
    fn projection_examples() {
        let up = UpAxis::from_gravity(&Vec3::new(0.0, -9.8, 0.0));
        let b = Aabb3::new(Vec3::zeros(), Vec3::new(1.0, 2.0, 3.0));
        let r = project_horizontal(&b, &up);
        assert_eq!(r.min, Vec2::new(0.0, 0.0));
        assert_eq!(r.max, Vec2::new(1.0, 3.0));

        let flat = Aabb3::new(Vec3::new(0.0, 1.0, 0.0), Vec3::new(1.0, 1.0, 3.0));
        assert_eq!(project_horizontal(&flat, &up), r);

        let unit = Aabb3::new(Vec3::zeros(), Vec3::repeat(1.0));
        let sq = project_horizontal(&unit, &up);
        assert_eq!(sq, Rect2::new(Vec2::zeros(), Vec2::repeat(1.0)));
    }

    #[test]
    fn inverted_gravity_top_bottom() {
        let up = UpAxis::from_gravity(&Vec3::new(0.0, 9.8, 0.0));
        let b = Aabb3::new(Vec3::new(0.0, -1.0, 0.0), Vec3::new(1.0, 2.0, 1.0));
        assert_eq!(up.top(&b), 1.0);
        assert_eq!(up.bottom(&b), -2.0);
    }
}
