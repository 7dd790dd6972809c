//! Active contact pairs and their barrier energy in point space.

use nalgebra::{SMatrix, SVector};

use super::barrier::{barrier, barrier_first, barrier_second, mollifier};
use super::project_psd;
use crate::error::{Error, Result};
use crate::geometry::{
    broad_phase, edge_edge_closest, point_triangle_closest, BodyGeometry, ClosestFeature,
    EdgeEdgeRegion, PointTriangleRegion, TriangleMesh, UpAxis, Vec3,
};

pub type Vec12 = SVector<f64, 12>;
pub type Mat12 = SMatrix<f64, 12, 12>;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ContactKind {
    /// Stencil `[vertex, t0, t1, t2]`.
    PointTriangle(PointTriangleRegion),
    /// Stencil `[a0, a1, b0, b1]`.
    EdgeEdge(EdgeEdgeRegion),
    /// A single vertex above the ground plane.
    Ground,
}

/// One active primitive pair with distance below d̂.
#[derive(Debug, Clone, PartialEq)]
pub struct Contact {
    pub kind: ContactKind,
    /// (body, vertex) for each stencil point; ground contacts use only the first.
    pub stencil: [(usize, usize); 4],
    /// Unsigned distance (m), always positive.
    pub distance: f64,
    pub feature: ClosestFeature,
    /// Mollifier threshold on `|u × v|²` for edge–edge pairs.
    pub mollifier_eps: f64,
}

impl Contact {
    pub fn len(&self) -> usize {
        match self.kind {
            ContactKind::Ground => 1,
            _ => 4,
        }
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn points(&self, positions: &[Vec<Vec3>]) -> [Vec3; 4] {
        self.stencil.map(|(b, v)| positions[b][v])
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ContactSet {
    pub contacts: Vec<Contact>,
}

impl ContactSet {
    pub fn len(&self) -> usize {
        self.contacts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.contacts.is_empty()
    }

    pub fn min_distance(&self) -> Option<f64> {
        self.contacts.iter().map(|c| c.distance).reduce(f64::min)
    }
}

/// What the contact search needs to know about the scene.
pub struct ContactModel<'a> {
    pub meshes: Vec<&'a TriangleMesh>,
    /// Squared edge lengths in the nominal rest pose, per body and edge.
    pub edge_rest_sq: &'a [Vec<f64>],
    pub dhat: f64,
    pub up: UpAxis,
    pub ground: Option<f64>,
    pub self_contact: bool,
}

impl ContactModel<'_> {
    /// All pairs closer than d̂ at `positions`. A pair at distance ≤ 0 is an error.
    pub fn gather(&self, positions: &[Vec<Vec3>]) -> Result<ContactSet> {
        let bodies: Vec<BodyGeometry<'_>> = self
            .meshes
            .iter()
            .zip(positions)
            .map(|(m, x)| BodyGeometry::new(m, x))
            .collect();
        let cand = broad_phase(&bodies, self.dhat, self.self_contact);
        let dhat2 = self.dhat * self.dhat;
        let mut out = Vec::new();
        for pair in &cand.point_triangle {
            let tri = self.meshes[pair.tri_body].triangles()[pair.tri];
            let p = positions[pair.vertex_body][pair.vertex];
            let t = tri.map(|i| positions[pair.tri_body][i]);
            let (d2, region, feature) = point_triangle_closest(&p, &t);
            if d2 >= dhat2 {
                continue;
            }
            if d2 <= 0.0 {
                return Err(Error::InvalidContactState(0.0));
            }
            out.push(Contact {
                kind: ContactKind::PointTriangle(region),
                stencil: [
                    (pair.vertex_body, pair.vertex),
                    (pair.tri_body, tri[0]),
                    (pair.tri_body, tri[1]),
                    (pair.tri_body, tri[2]),
                ],
                distance: d2.sqrt(),
                feature,
                mollifier_eps: 0.0,
            });
        }
        for pair in &cand.edge_edge {
            let ea = self.meshes[pair.body_a].edges()[pair.edge_a];
            let eb = self.meshes[pair.body_b].edges()[pair.edge_b];
            let a = ea.map(|i| positions[pair.body_a][i]);
            let b = eb.map(|i| positions[pair.body_b][i]);
            let (d2, region, feature) = edge_edge_closest(&a, &b);
            if d2 >= dhat2 {
                continue;
            }
            if d2 <= 0.0 {
                return Err(Error::InvalidContactState(0.0));
            }
            let eps = 1e-3
                * self.edge_rest_sq[pair.body_a][pair.edge_a]
                * self.edge_rest_sq[pair.body_b][pair.edge_b];
            out.push(Contact {
                kind: ContactKind::EdgeEdge(region),
                stencil: [
                    (pair.body_a, ea[0]),
                    (pair.body_a, ea[1]),
                    (pair.body_b, eb[0]),
                    (pair.body_b, eb[1]),
                ],
                distance: d2.sqrt(),
                feature,
                mollifier_eps: eps,
            });
        }
        if let Some(g) = self.ground {
            for (b, xs) in positions.iter().enumerate() {
                for (v, x) in xs.iter().enumerate() {
                    let h = self.up.height(x) - g;
                    if h >= self.dhat {
                        continue;
                    }
                    if h <= 0.0 {
                        return Err(Error::InvalidContactState(h));
                    }
                    out.push(Contact {
                        kind: ContactKind::Ground,
                        stencil: [(b, v); 4],
                        distance: h,
                        feature: ground_feature(),
                        mollifier_eps: 0.0,
                    });
                }
            }
        }
        Ok(ContactSet { contacts: out })
    }
}

fn ground_feature() -> ClosestFeature {
    ClosestFeature {
        base: [1.0, 0.0, 0.0, 0.0],
        dirs: [[0.0; 4]; 2],
        theta: [0.0; 2],
        free: 0,
    }
}

/// Distance with gradient and Hessian over the stencil (only the first three
/// entries are meaningful for ground contacts).
pub fn distance_derivatives(
    c: &Contact,
    x: &[Vec3; 4],
    up: &UpAxis,
    ground: f64,
) -> (f64, Vec12, Mat12) {
    match c.kind {
        ContactKind::Ground => {
            let mut g = Vec12::zeros();
            g.fixed_rows_mut::<3>(0).copy_from(&up.up());
            (up.height(&x[0]) - ground, g, Mat12::zeros())
        }
        _ => {
            let (f, gf, hf) = c.feature.sq_distance_derivatives(x);
            let d = f.sqrt();
            let g = gf / (2.0 * d);
            let h = hf / (2.0 * d) - gf * gf.transpose() / (4.0 * d * d * d);
            (d, g, h)
        }
    }
}

/// `|u × v|²` of two edges `(x0, x1)`, `(x2, x3)` with derivatives.
pub fn cross_sq_derivatives(x: &[Vec3; 4]) -> (f64, Vec12, Mat12) {
    let u = x[1] - x[0];
    let v = x[3] - x[2];
    let uu = u.norm_squared();
    let vv = v.norm_squared();
    let uv = u.dot(&v);
    let c = uu * vv - uv * uv;
    let gu = u * (2.0 * vv) - v * (2.0 * uv);
    let gv = v * (2.0 * uu) - u * (2.0 * uv);
    let i3 = nalgebra::Matrix3::<f64>::identity();
    let huu = i3 * (2.0 * vv) - v * v.transpose() * 2.0;
    let hvv = i3 * (2.0 * uu) - u * u.transpose() * 2.0;
    let huv = u * v.transpose() * 4.0 - v * u.transpose() * 2.0 - i3 * (2.0 * uv);
    // u = x1 - x0, v = x3 - x2
    let su = [-1.0, 1.0, 0.0, 0.0];
    let sv = [0.0, 0.0, -1.0, 1.0];
    let mut g = Vec12::zeros();
    let mut h = Mat12::zeros();
    for k in 0..4 {
        g.fixed_rows_mut::<3>(3 * k)
            .copy_from(&(gu * su[k] + gv * sv[k]));
        for l in 0..4 {
            let blk = huu * (su[k] * su[l])
                + hvv * (sv[k] * sv[l])
                + huv * (su[k] * sv[l])
                + huv.transpose() * (sv[k] * su[l]);
            h.fixed_view_mut::<3, 3>(3 * k, 3 * l).copy_from(&blk);
        }
    }
    (c, g, h)
}

/// Barrier energy of one contact with gradient and Hessian over its stencil.
pub fn contact_energy(
    c: &Contact,
    x: &[Vec3; 4],
    dhat: f64,
    kappa: f64,
    up: &UpAxis,
    ground: f64,
    project: bool,
) -> (f64, Vec12, Mat12) {
    let (d, gd, hd) = distance_derivatives(c, x, up, ground);
    let b = barrier(d, dhat, kappa);
    let b1 = barrier_first(d, dhat, kappa);
    let b2 = barrier_second(d, dhat, kappa);
    let mut e = b;
    let mut g = gd * b1;
    let mut h = gd * gd.transpose() * b2 + hd * b1;
    if let ContactKind::EdgeEdge(_) = c.kind {
        let (cc, gc, hc) = cross_sq_derivatives(x);
        let (m, m1, m2) = mollifier(cc, c.mollifier_eps);
        if m < 1.0 {
            let gm = gc * m1;
            let hm = gc * gc.transpose() * m2 + hc * m1;
            h = h * m + hm * b + gm * g.transpose() + g * gm.transpose();
            g = g * m + gm * b;
            e = b * m;
        }
    }
    if project {
        h = match c.kind {
            ContactKind::Ground => h,
            _ => project_psd(&h),
        };
    }
    (e, g, h)
}

/// Normal force magnitude `−∂e/∂d` of a contact (mollified for edge–edge).
pub fn normal_force(c: &Contact, x: &[Vec3; 4], dhat: f64, kappa: f64) -> f64 {
    let mut lambda = -barrier_first(c.distance, dhat, kappa);
    if let ContactKind::EdgeEdge(_) = c.kind {
        let (cc, _, _) = cross_sq_derivatives(x);
        lambda *= mollifier(cc, c.mollifier_eps).0;
    }
    lambda
}

/// Gradient of [`normal_force`] over the stencil.
pub fn normal_force_gradient(
    c: &Contact,
    x: &[Vec3; 4],
    dhat: f64,
    kappa: f64,
    up: &UpAxis,
    ground: f64,
) -> Vec12 {
    let (d, gd, _) = distance_derivatives(c, x, up, ground);
    let mut g = gd * -barrier_second(d, dhat, kappa);
    if let ContactKind::EdgeEdge(_) = c.kind {
        let (cc, gc, _) = cross_sq_derivatives(x);
        let (m, m1, _) = mollifier(cc, c.mollifier_eps);
        g = g * m - gc * (barrier_first(d, dhat, kappa) * m1);
    }
    g
}
