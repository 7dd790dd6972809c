//! Conservative time-of-impact bounds along linear vertex trajectories.

use crate::geometry::{
    broad_phase, edge_edge_closest, point_triangle_closest, BodyGeometry, TriangleMesh, UpAxis,
    Vec3,
};

/// Fraction of the current distance a pair may close in one advancement.
const MIN_SEPARATION: f64 = 0.1;
const SAFETY: f64 = 0.9;
const MAX_ADVANCE: usize = 10_000;

/// Additive conservative advancement on a four-point stencil. Returns a step
/// fraction in `[0, t_max]` that keeps the pair at least `MIN_SEPARATION` of
/// its starting distance apart, or `t_max` when no impact is possible.
fn accd(mut x: [Vec3; 4], mut p: [Vec3; 4], edge_edge: bool, t_max: f64) -> f64 {
    let dist = |x: &[Vec3; 4]| {
        if edge_edge {
            edge_edge_closest(&[x[0], x[1]], &[x[2], x[3]]).0.sqrt()
        } else {
            point_triangle_closest(&x[0], &[x[1], x[2], x[3]]).0.sqrt()
        }
    };
    let mean = (p[0] + p[1] + p[2] + p[3]) / 4.0;
    for v in &mut p {
        *v -= mean;
    }
    let lp = if edge_edge {
        p[0].norm().max(p[1].norm()) + p[2].norm().max(p[3].norm())
    } else {
        p[0].norm() + p[1].norm().max(p[2].norm()).max(p[3].norm())
    };
    if lp == 0.0 {
        return t_max;
    }
    let mut d = dist(&x);
    let gap = MIN_SEPARATION * d;
    let mut t = 0.0;
    let mut tl = (1.0 - MIN_SEPARATION) * d / lp;
    for _ in 0..MAX_ADVANCE {
        for k in 0..4 {
            x[k] += p[k] * tl;
        }
        d = dist(&x);
        if t > 0.0 && d < gap {
            return t;
        }
        t += tl;
        if t > t_max {
            return t_max;
        }
        tl = SAFETY * d / lp;
    }
    t
}

/// Largest step fraction in `[0, 1]` for which moving every vertex by its
/// displacement keeps all primitive pairs and the ground separated.
pub fn max_step(
    meshes: &[&TriangleMesh],
    positions: &[Vec<Vec3>],
    displacement: &[Vec<Vec3>],
    up: &UpAxis,
    ground: Option<f64>,
    self_contact: bool,
) -> f64 {
    let mut t = 1.0f64;
    if let Some(g) = ground {
        for (xs, ds) in positions.iter().zip(displacement) {
            for (x, d) in xs.iter().zip(ds) {
                let dh = up.height(d);
                if dh < 0.0 {
                    let h = up.height(x) - g;
                    t = t.min((1.0 - MIN_SEPARATION) * h / -dh);
                }
            }
        }
    }
    let bodies: Vec<BodyGeometry<'_>> = meshes
        .iter()
        .zip(positions)
        .zip(displacement)
        .map(|((m, x), d)| BodyGeometry::swept(m, x, d))
        .collect();
    let cand = broad_phase(&bodies, 0.0, self_contact);
    for pair in &cand.point_triangle {
        let tri = meshes[pair.tri_body].triangles()[pair.tri];
        let (vb, v, tb) = (pair.vertex_body, pair.vertex, pair.tri_body);
        let x = [
            positions[vb][v],
            positions[tb][tri[0]],
            positions[tb][tri[1]],
            positions[tb][tri[2]],
        ];
        let p = [
            displacement[vb][v],
            displacement[tb][tri[0]],
            displacement[tb][tri[1]],
            displacement[tb][tri[2]],
        ];
        t = accd(x, p, false, t);
    }
    for pair in &cand.edge_edge {
        let ea = meshes[pair.body_a].edges()[pair.edge_a];
        let eb = meshes[pair.body_b].edges()[pair.edge_b];
        let (ba, bb) = (pair.body_a, pair.body_b);
        let x = [
            positions[ba][ea[0]],
            positions[ba][ea[1]],
            positions[bb][eb[0]],
            positions[bb][eb[1]],
        ];
        let p = [
            displacement[ba][ea[0]],
            displacement[ba][ea[1]],
            displacement[bb][eb[0]],
            displacement[bb][eb[1]],
        ];
        t = accd(x, p, true, t);
    }
    t.max(0.0)
}
