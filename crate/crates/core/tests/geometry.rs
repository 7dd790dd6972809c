mod common;

use std::collections::HashSet;
use std::sync::Arc;

use nalgebra::{Matrix3, Rotation3};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use common::brute_force_cross_pairs;
use layoutsim::geometry::shapes::{cuboid, trapezoid_prism};
use layoutsim::geometry::{
    broad_phase, compute_aabb, edge_edge_distance, intersecting_triangle_pairs,
    point_triangle_distance, BodyGeometry, TriangleMesh, Vec3,
};
use layoutsim::sim::ccd::max_step;
use layoutsim::sim::compute_affine_mass;
use layoutsim::AffineState;

fn random_rigid(rng: &mut ChaCha8Rng, spread: f64) -> AffineState {
    let r = Rotation3::from_euler_angles(
        rng.random_range(-3.0..3.0),
        rng.random_range(-1.5..1.5),
        rng.random_range(-3.0..3.0),
    );
    let p = Vec3::new(
        rng.random_range(-1.0..1.0),
        rng.random_range(-1.0..1.0),
        rng.random_range(-1.0..1.0),
    ) * spread;
    AffineState::new(p, r.into_inner())
}

fn place(mesh: &TriangleMesh, s: &AffineState) -> Vec<Vec3> {
    mesh.vertices().iter().map(|v| s.apply(v)).collect()
}

#[test]
fn broad_phase_keeps_every_close_pair() {
    let mesh = cuboid(Vec3::new(0.3, 0.2, 0.25)).subdivided();
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let r = 0.05;
    for _ in 0..6 {
        let xa = place(&mesh, &random_rigid(&mut rng, 0.05));
        let xb = place(
            &mesh,
            &AffineState::new(Vec3::new(0.62, 0.0, 0.0), random_rigid(&mut rng, 0.0).a),
        );
        let bodies = [BodyGeometry::new(&mesh, &xa), BodyGeometry::new(&mesh, &xb)];
        let cand = broad_phase(&bodies, r, false);
        let pt: HashSet<_> = cand
            .point_triangle
            .iter()
            .map(|c| (c.vertex_body, c.vertex, c.tri_body, c.tri))
            .collect();
        let ee: HashSet<_> = cand
            .edge_edge
            .iter()
            .flat_map(|c| {
                [
                    (c.body_a, c.edge_a, c.body_b, c.edge_b),
                    (c.body_b, c.edge_b, c.body_a, c.edge_a),
                ]
            })
            .collect();
        let x = [&xa, &xb];
        let mut close = 0;
        for (a, b) in [(0, 1), (1, 0)] {
            for (v, p) in x[a].iter().enumerate() {
                for (t, tri) in mesh.triangles().iter().enumerate() {
                    let tri = [x[b][tri[0]], x[b][tri[1]], x[b][tri[2]]];
                    if point_triangle_distance(p, &tri).unwrap().0 < r {
                        close += 1;
                        assert!(pt.contains(&(a, v, b, t)), "missed point-triangle pair");
                    }
                }
            }
        }
        for (i, ea) in mesh.edges().iter().enumerate() {
            for (j, eb) in mesh.edges().iter().enumerate() {
                let d = edge_edge_distance(&[xa[ea[0]], xa[ea[1]]], &[xb[eb[0]], xb[eb[1]]])
                    .unwrap()
                    .0;
                if d < r {
                    close += 1;
                    assert!(ee.contains(&(0, i, 1, j)), "missed edge-edge pair");
                }
            }
        }
        assert!(
            close > 0,
            "bodies too far apart to exercise the broad phase"
        );
    }
}

#[test]
fn intersection_counts_match_all_pairs() {
    let mesh = Arc::new(cuboid(Vec3::repeat(0.2)).subdivided());
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut hits = 0;
    for _ in 0..8 {
        let states = vec![random_rigid(&mut rng, 0.1), random_rigid(&mut rng, 0.1)];
        let x: Vec<Vec<Vec3>> = states.iter().map(|s| place(&mesh, s)).collect();
        let bodies: Vec<_> = x.iter().map(|p| BodyGeometry::new(&mesh, p)).collect();
        let fast = intersecting_triangle_pairs(&bodies).cross;
        let slow = brute_force_cross_pairs(&[mesh.clone(), mesh.clone()], &states);
        assert_eq!(fast, slow);
        hits += fast;
    }
    assert!(hits > 0);
}

/// Distance to a triangle by dense barycentric sampling.
fn sampled_point_triangle(p: &Vec3, t: &[Vec3; 3], n: usize) -> f64 {
    let mut best = f64::INFINITY;
    for i in 0..=n {
        for j in 0..=n - i {
            let (a, b) = (i as f64 / n as f64, j as f64 / n as f64);
            let q = t[0] + (t[1] - t[0]) * a + (t[2] - t[0]) * b;
            best = best.min((p - q).norm());
        }
    }
    best
}

fn sampled_edge_edge(a: &[Vec3; 2], b: &[Vec3; 2], n: usize) -> f64 {
    let mut best = f64::INFINITY;
    for i in 0..=n {
        let p = a[0] + (a[1] - a[0]) * (i as f64 / n as f64);
        for j in 0..=n {
            let q = b[0] + (b[1] - b[0]) * (j as f64 / n as f64);
            best = best.min((p - q).norm());
        }
    }
    best
}

fn vec3() -> impl Strategy<Value = Vec3> {
    (-1.0..1.0f64, -1.0..1.0f64, -1.0..1.0f64).prop_map(|(x, y, z)| Vec3::new(x, y, z))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn point_triangle_distance_is_the_sampled_minimum(p in vec3(), a in vec3(), b in vec3(), c in vec3()) {
        let t = [a, b, c];
        prop_assume!((b - a).cross(&(c - a)).norm() > 1e-2);
        let d = point_triangle_distance(&p, &t).unwrap().0;
        let s = sampled_point_triangle(&p, &t, 200);
        let h = [(b - a).norm(), (c - a).norm(), (c - b).norm()].iter().fold(0.0f64, |m, x| m.max(*x)) / 200.0;
        prop_assert!(d <= s + 1e-12);
        prop_assert!(s - d <= h);
    }

    #[test]
    fn edge_edge_distance_is_the_sampled_minimum(a0 in vec3(), a1 in vec3(), b0 in vec3(), b1 in vec3()) {
        prop_assume!((a1 - a0).norm() > 1e-2 && (b1 - b0).norm() > 1e-2);
        let d = edge_edge_distance(&[a0, a1], &[b0, b1]).unwrap().0;
        let s = sampled_edge_edge(&[a0, a1], &[b0, b1], 400);
        let h = ((a1 - a0).norm() + (b1 - b0).norm()) / 400.0;
        prop_assert!(d <= s + 1e-12);
        prop_assert!(s - d <= h);
    }

    #[test]
    fn distances_are_rigidly_invariant(p in vec3(), a in vec3(), b in vec3(), c in vec3(), ang in (-3.0..3.0f64, -1.5..1.5f64, -3.0..3.0f64), shift in vec3()) {
        prop_assume!((b - a).cross(&(c - a)).norm() > 1e-3);
        let r = Rotation3::from_euler_angles(ang.0, ang.1, ang.2);
        let m = |x: &Vec3| r * x + shift;
        let d0 = point_triangle_distance(&p, &[a, b, c]).unwrap().0;
        let d1 = point_triangle_distance(&m(&p), &[m(&a), m(&b), m(&c)]).unwrap().0;
        prop_assert!((d0 - d1).abs() < 1e-12 * (1.0 + d0));
        let e0 = edge_edge_distance(&[p, a], &[b, c]).unwrap().0;
        let e1 = edge_edge_distance(&[m(&p), m(&a)], &[m(&b), m(&c)]).unwrap().0;
        prop_assert!((e0 - e1).abs() < 1e-12 * (1.0 + e0));
    }

    #[test]
    fn aabb_bounds_every_transformed_vertex(a in proptest::array::uniform9(-1.0..1.0f64), p in vec3()) {
        let mesh = trapezoid_prism(0.4, 0.2, 0.3, 0.25);
        let s = AffineState::new(p, Matrix3::from_row_slice(&a));
        let b = compute_aabb(&mesh, &s).unwrap();
        let x = place(&mesh, &s);
        for k in 0..3 {
            let lo = x.iter().map(|v| v[k]).fold(f64::INFINITY, f64::min);
            let hi = x.iter().map(|v| v[k]).fold(f64::NEG_INFINITY, f64::max);
            prop_assert_eq!(b.min[k], lo);
            prop_assert_eq!(b.max[k], hi);
        }
    }
}

/// Moments of a trapezoidal prism by Simpson's rule over horizontal slices.
fn slice_moments(base: f64, top: f64, height: f64, depth: f64) -> (f64, Vec3, Matrix3<f64>) {
    let n = 2000;
    let dy = height / n as f64;
    let mut vol = 0.0;
    let mut first = Vec3::zeros();
    let mut second = Matrix3::zeros();
    for k in 0..=n {
        let y = k as f64 * dy;
        let w = base + (top - base) * y / height;
        let weight = if k == 0 || k == n {
            1.0
        } else if k % 2 == 1 {
            4.0
        } else {
            2.0
        } * dy
            / 3.0;
        let area = w * depth;
        vol += weight * area;
        first.y += weight * area * y;
        second[(0, 0)] += weight * depth * w.powi(3) / 12.0;
        second[(1, 1)] += weight * area * y * y;
        second[(2, 2)] += weight * w * depth.powi(3) / 12.0;
    }
    (vol, first, second)
}

#[test]
fn mass_moments_match_slice_quadrature() {
    let (base, top, height, depth) = (0.1, 0.04, 0.08, 0.06);
    let mesh = trapezoid_prism(base, top, height, depth);
    let rho = 700.0;
    let m = compute_affine_mass(&mesh, rho).unwrap();
    let (vol, first, second) = slice_moments(base, top, height, depth);
    assert!((m.mass - rho * vol).abs() < 1e-10 * m.mass);
    assert!((m.first - first * rho).norm() < 1e-10 * (m.mass * height));
    assert!((m.second - second * rho).norm() < 1e-10 * (m.mass * height * height));
    // kinetic energy of an affine velocity against the same quadrature
    let (v, g) = (
        Vec3::new(0.3, -0.2, 0.5),
        Matrix3::new(0.1, -0.4, 0.2, 0.3, 0.05, -0.1, 0.2, 0.1, -0.3),
    );
    let mut qd = nalgebra::SVector::<f64, 12>::zeros();
    qd.fixed_rows_mut::<3>(0).copy_from(&v);
    for i in 0..3 {
        for j in 0..3 {
            qd[3 + 3 * i + j] = g[(i, j)];
        }
    }
    let ke = 0.5 * (qd.transpose() * m.matrix * qd)[0];
    // ∫ρ|v + G x|² = ρ(|v|² V + 2 vᵀG ∫x + tr(G ∫xxᵀ Gᵀ))
    let expected = 0.5
        * rho
        * (v.norm_squared() * vol
            + 2.0 * v.dot(&(g * first))
            + (g * second * g.transpose()).trace());
    assert!((ke - expected).abs() < 1e-10 * expected.abs());
}

#[test]
fn cube_mass_is_analytic() {
    let h = Vec3::new(0.1, 0.2, 0.3);
    let m = compute_affine_mass(&cuboid(h), 1000.0).unwrap();
    let vol = 8.0 * h.x * h.y * h.z;
    assert!((m.mass - 1000.0 * vol).abs() < 1e-9);
    assert!(m.first.norm() < 1e-12);
    for k in 0..3 {
        assert!((m.second[(k, k)] - 1000.0 * vol * h[k] * h[k] / 3.0).abs() < 1e-9);
    }
}

#[test]
fn ccd_step_never_produces_intersections() {
    let mesh = cuboid(Vec3::repeat(0.1));
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..20 {
        let a = place(&mesh, &random_rigid(&mut rng, 0.0));
        let b = place(
            &mesh,
            &AffineState::new(Vec3::new(0.45, 0.0, 0.0), random_rigid(&mut rng, 0.0).a),
        );
        let push = Vec3::new(
            rng.random_range(-0.8..-0.3),
            rng.random_range(-0.1..0.1),
            rng.random_range(-0.1..0.1),
        );
        let spin = random_rigid(&mut rng, 0.0).a;
        let center: Vec3 = b.iter().sum::<Vec3>() / b.len() as f64;
        let disp_b: Vec<Vec3> = b
            .iter()
            .map(|x| push + (spin * (x - center) - (x - center)) * 0.3)
            .collect();
        let disp_a = vec![Vec3::zeros(); a.len()];
        let t = max_step(
            &[&mesh, &mesh],
            &[a.clone(), b.clone()],
            &[disp_a, disp_b.clone()],
            &layoutsim::geometry::UpAxis::from_gravity(&Vec3::new(0.0, -9.8, 0.0)),
            None,
            false,
        );
        assert!((0.0..=1.0).contains(&t));
        let moved: Vec<Vec3> = b.iter().zip(&disp_b).map(|(x, d)| x + d * t).collect();
        for step in [t, t * 0.5] {
            let mid: Vec<Vec3> = b.iter().zip(&disp_b).map(|(x, d)| x + d * step).collect();
            let bodies = [BodyGeometry::new(&mesh, &a), BodyGeometry::new(&mesh, &mid)];
            assert_eq!(intersecting_triangle_pairs(&bodies).cross, 0);
        }
        let bodies = [
            BodyGeometry::new(&mesh, &a),
            BodyGeometry::new(&mesh, &moved),
        ];
        assert_eq!(intersecting_triangle_pairs(&bodies).cross, 0);
    }
}
