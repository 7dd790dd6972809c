//! Exact-arithmetic-free triangle–triangle intersection counting.

use super::broad_phase::SpatialHash;
use super::distance::{edge_edge_closest, point_triangle_closest};
use super::{Aabb3, BodyGeometry, Vec3};

/// Distances at or below this (m) count as touching.
pub const INTERSECTION_EPS: f64 = 1e-10;

/// Does segment `p→q` cross the interior or boundary of triangle `tri`?
/// Coplanar segments are not reported here.
pub fn segment_triangle_intersect(p: &Vec3, q: &Vec3, tri: &[Vec3; 3]) -> bool {
    let n = (tri[1] - tri[0]).cross(&(tri[2] - tri[0]));
    let nn = n.norm();
    if nn == 0.0 {
        return false;
    }
    let n = n / nn;
    let sp = n.dot(&(p - tri[0]));
    let sq = n.dot(&(q - tri[0]));
    if (sp > 0.0 && sq > 0.0) || (sp < 0.0 && sq < 0.0) || (sp == 0.0 && sq == 0.0) {
        return false;
    }
    let x = p + (q - p) * (sp / (sp - sq));
    let tol = -1e-12;
    (0..3).all(|k| {
        let a = tri[k];
        let b = tri[(k + 1) % 3];
        n.dot(&(b - a).cross(&(x - a))) >= tol * (b - a).norm()
    })
}

/// Two triangles intersect when they touch within [`INTERSECTION_EPS`] or one
/// pierces the other.
pub fn triangles_intersect(t1: &[Vec3; 3], t2: &[Vec3; 3]) -> bool {
    let b1 = Aabb3::from_points(t1.iter().copied())
        .unwrap()
        .inflated(INTERSECTION_EPS);
    let b2 = Aabb3::from_points(t2.iter().copied()).unwrap();
    if !b1.intersects(&b2) {
        return false;
    }
    let eps2 = INTERSECTION_EPS * INTERSECTION_EPS;
    for k in 0..3 {
        if point_triangle_closest(&t1[k], t2).0 <= eps2
            || point_triangle_closest(&t2[k], t1).0 <= eps2
        {
            return true;
        }
    }
    for i in 0..3 {
        let ea = [t1[i], t1[(i + 1) % 3]];
        for j in 0..3 {
            let eb = [t2[j], t2[(j + 1) % 3]];
            if edge_edge_closest(&ea, &eb).0 <= eps2 {
                return true;
            }
        }
    }
    (0..3).any(|i| segment_triangle_intersect(&t1[i], &t1[(i + 1) % 3], t2))
        || (0..3).any(|i| segment_triangle_intersect(&t2[i], &t2[(i + 1) % 3], t1))
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct PenetrationCount {
    /// Intersecting triangle pairs whose triangles belong to different objects.
    pub cross: usize,
    /// Per object: intersecting pairs of non-adjacent triangles of that object.
    pub self_pairs: Vec<usize>,
    /// Per object: cross pairs it takes part in.
    pub per_object_cross: Vec<usize>,
}

impl PenetrationCount {
    pub fn total(&self) -> usize {
        self.cross + self.self_pairs.iter().sum::<usize>()
    }
}

/// Count intersecting triangle pairs across a scene, split into cross-object and
/// within-object pairs. Triangles sharing a vertex are never counted as a
/// self pair.
pub fn intersecting_triangle_pairs(bodies: &[BodyGeometry<'_>]) -> PenetrationCount {
    let mut count = PenetrationCount {
        cross: 0,
        self_pairs: vec![0; bodies.len()],
        per_object_cross: vec![0; bodies.len()],
    };
    let mut boxes = Vec::new();
    let mut size = 0.0;
    for (b, body) in bodies.iter().enumerate() {
        for (t, tri) in body.mesh.triangles().iter().enumerate() {
            let bx = Aabb3::from_points(tri.iter().map(|&i| body.positions[i]))
                .unwrap()
                .inflated(INTERSECTION_EPS);
            size += bx.extent().max();
            boxes.push(((b, t), bx));
        }
    }
    if boxes.is_empty() {
        return count;
    }
    let cell = (size / boxes.len() as f64).max(1e-9);
    let mut hash = SpatialHash::new(cell);
    for (key, bx) in &boxes {
        hash.insert(bx, *key);
    }
    let tri_pos =
        |b: usize, t: usize| bodies[b].mesh.triangles()[t].map(|i| bodies[b].positions[i]);
    let mut hits = Vec::new();
    for &((b1, t1), bx) in &boxes {
        hash.query(&bx, &mut hits);
        for &(b2, t2) in &hits {
            if (b2, t2) <= (b1, t1) {
                continue;
            }
            if b1 == b2 {
                let ta = bodies[b1].mesh.triangles()[t1];
                let tb = bodies[b2].mesh.triangles()[t2];
                if ta.iter().any(|v| tb.contains(v)) {
                    continue;
                }
            }
            if triangles_intersect(&tri_pos(b1, t1), &tri_pos(b2, t2)) {
                if b1 == b2 {
                    count.self_pairs[b1] += 1;
                } else {
                    count.cross += 1;
                    count.per_object_cross[b1] += 1;
                    count.per_object_cross[b2] += 1;
                }
            }
        }
    }
    count
}
