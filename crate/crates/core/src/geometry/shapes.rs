//! Closed test and scene meshes built procedurally.

use super::{TriangleMesh, Vec2, Vec3};

/// Axis-aligned box centred at the origin.
pub fn cuboid(half: Vec3) -> TriangleMesh {
    let profile = [
        Vec2::new(-half.z, -half.x),
        Vec2::new(-half.z, half.x),
        Vec2::new(half.z, half.x),
        Vec2::new(half.z, -half.x),
    ];
    prism(&ccw(&profile), 1, -half.y, half.y)
}

/// Box spanning `min..max`.
pub fn cuboid_between(min: Vec3, max: Vec3) -> TriangleMesh {
    cuboid((max - min) * 0.5).translated(&((min + max) * 0.5))
}

/// Right prism of a convex polygon swept along `axis` from `w0` to `w1`.
///
/// The profile lives in the plane of the two remaining axes taken in cyclic
/// order after `axis` (z,x for y; x,y for z; y,z for x).
pub fn prism(profile: &[Vec2], axis: usize, w0: f64, w1: f64) -> TriangleMesh {
    assert!(profile.len() >= 3 && w1 > w0);
    let (iu, iv) = ((axis + 1) % 3, (axis + 2) % 3);
    let n = profile.len();
    let at = |p: &Vec2, w: f64| {
        let mut v = Vec3::zeros();
        v[iu] = p.x;
        v[iv] = p.y;
        v[axis] = w;
        v
    };
    let mut vertices: Vec<Vec3> = profile.iter().map(|p| at(p, w0)).collect();
    vertices.extend(profile.iter().map(|p| at(p, w1)));
    let mut triangles = Vec::new();
    for k in 1..n - 1 {
        triangles.push([0, k + 1, k]);
        triangles.push([n, n + k, n + k + 1]);
    }
    for k in 0..n {
        let k1 = (k + 1) % n;
        triangles.push([k, k1, n + k1]);
        triangles.push([k, n + k1, n + k]);
    }
    oriented(TriangleMesh::new(vertices, triangles).expect("valid prism"))
}

/// Upright regular `segments`-gon prism with its base centred at the origin.
pub fn cylinder(radius: f64, height: f64, segments: usize) -> TriangleMesh {
    let profile: Vec<Vec2> = (0..segments)
        .map(|k| {
            let t = std::f64::consts::TAU * k as f64 / segments as f64;
            Vec2::new(radius * t.cos(), radius * t.sin())
        })
        .collect();
    prism(&ccw(&profile), 1, 0.0, height)
}

/// Symmetric trapezoidal ridge (a "pedestal" with sloped sides): base width
/// `base` along x, flat top of width `top`, height `height` along y, depth
/// `depth` along z. Base centred at the origin.
pub fn trapezoid_prism(base: f64, top: f64, height: f64, depth: f64) -> TriangleMesh {
    let profile = [
        Vec2::new(-0.5 * base, 0.0),
        Vec2::new(0.5 * base, 0.0),
        Vec2::new(0.5 * top, height),
        Vec2::new(-0.5 * top, height),
    ];
    prism(&ccw(&profile), 2, -0.5 * depth, 0.5 * depth)
}

/// Open-top rectangular container (tray, basket, cup). Outer footprint
/// `2*half_x` by `2*half_z`, walls of thickness `wall`, floor thickness
/// `floor`, base at y = 0.
pub fn open_box(half_x: f64, half_z: f64, height: f64, wall: f64, floor: f64) -> TriangleMesh {
    assert!(wall < half_x && wall < half_z && floor < height);
    let ring = |hx: f64, hz: f64, y: f64| {
        [
            Vec3::new(-hx, y, -hz),
            Vec3::new(hx, y, -hz),
            Vec3::new(hx, y, hz),
            Vec3::new(-hx, y, hz),
        ]
    };
    let mut vertices = Vec::new();
    vertices.extend(ring(half_x, half_z, 0.0)); // 0..4 outer bottom
    vertices.extend(ring(half_x, half_z, height)); // 4..8 outer top
    vertices.extend(ring(half_x - wall, half_z - wall, height)); // 8..12 inner top
    vertices.extend(ring(half_x - wall, half_z - wall, floor)); // 12..16 inner floor
    let mut triangles = Vec::new();
    let mut quad = |q: [usize; 4], normal: Vec3, vertices: &[Vec3]| {
        let [a, b, c, d] = q;
        let n = (vertices[b] - vertices[a]).cross(&(vertices[c] - vertices[a]));
        if n.dot(&normal) >= 0.0 {
            triangles.push([a, b, c]);
            triangles.push([a, c, d]);
        } else {
            triangles.push([a, c, b]);
            triangles.push([a, d, c]);
        }
    };
    quad([0, 1, 2, 3], -Vec3::y(), &vertices);
    quad([12, 13, 14, 15], Vec3::y(), &vertices);
    for k in 0..4 {
        let k1 = (k + 1) % 4;
        let mid = (vertices[k] + vertices[k1]) * 0.5;
        let outward = Vec3::new(mid.x, 0.0, mid.z).normalize();
        quad([k, k1, 4 + k1, 4 + k], outward, &vertices);
        quad([4 + k, 4 + k1, 8 + k1, 8 + k], Vec3::y(), &vertices);
        quad([8 + k, 8 + k1, 12 + k1, 12 + k], -outward, &vertices);
    }
    TriangleMesh::new(vertices, triangles).expect("valid container")
}

/// Reorder a convex polygon counter-clockwise.
fn ccw(profile: &[Vec2]) -> Vec<Vec2> {
    let area: f64 = (0..profile.len())
        .map(|k| {
            let (a, b) = (profile[k], profile[(k + 1) % profile.len()]);
            a.x * b.y - a.y * b.x
        })
        .sum();
    let mut p = profile.to_vec();
    if area < 0.0 {
        p.reverse();
    }
    p
}

fn oriented(mesh: TriangleMesh) -> TriangleMesh {
    if mesh.signed_volume() < 0.0 {
        mesh.flipped()
    } else {
        mesh
    }
}
