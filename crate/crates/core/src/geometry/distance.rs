//! Point–triangle and edge–edge distances with closest-feature classification.
//!
//! Every distance query also produces a [`ClosestFeature`]: the affine weights
//! `w` such that the closest-point difference vector is `r = Σ w_k x_k` over the
//! four stencil points, plus the directions in which those weights are still free
//! (the interior parameters of the active feature). Squared-distance gradients and
//! Hessians on the active smooth branch follow from that description alone.

use nalgebra::{Matrix2, SMatrix, SVector};

use super::Vec3;
use crate::error::{Error, Result};

pub type Vec12 = SVector<f64, 12>;
pub type Mat12 = SMatrix<f64, 12, 12>;

/// Closest feature of a triangle `(t0, t1, t2)` to a point.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum PointTriangleRegion {
    /// Triangle vertex `k`.
    Vertex(u8),
    /// Edge `k` joins vertex `k` to vertex `(k + 1) % 3`.
    Edge(u8),
    Face,
}

/// Closest features of two segments `(a0, a1)` and `(b0, b1)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum EdgeEdgeRegion {
    /// Endpoint of `a` against endpoint of `b`.
    VertexVertex(u8, u8),
    /// Endpoint of `a` against the interior of `b`.
    VertexEdge(u8),
    /// Interior of `a` against an endpoint of `b`.
    EdgeVertex(u8),
    EdgeEdge,
}

/// Affine closest-point weights over a four-point stencil.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClosestFeature {
    pub base: [f64; 4],
    pub dirs: [[f64; 4]; 2],
    pub theta: [f64; 2],
    pub free: usize,
}

impl ClosestFeature {
    fn fixed(base: [f64; 4]) -> Self {
        Self {
            base,
            dirs: [[0.0; 4]; 2],
            theta: [0.0; 2],
            free: 0,
        }
    }

    fn one(base: [f64; 4], dir: [f64; 4], t: f64) -> Self {
        Self {
            base,
            dirs: [dir, [0.0; 4]],
            theta: [t, 0.0],
            free: 1,
        }
    }

    fn two(base: [f64; 4], d0: [f64; 4], d1: [f64; 4], t0: f64, t1: f64) -> Self {
        Self {
            base,
            dirs: [d0, d1],
            theta: [t0, t1],
            free: 2,
        }
    }

    pub fn weights(&self) -> [f64; 4] {
        let mut w = self.base;
        for m in 0..self.free {
            for k in 0..4 {
                w[k] += self.theta[m] * self.dirs[m][k];
            }
        }
        w
    }

    pub fn difference(&self, x: &[Vec3; 4]) -> Vec3 {
        let w = self.weights();
        (0..4).fold(Vec3::zeros(), |acc, k| acc + x[k] * w[k])
    }

    /// Squared distance with its gradient and Hessian w.r.t. the 12 stencil
    /// coordinates, on the smooth branch of this feature.
    pub fn sq_distance_derivatives(&self, x: &[Vec3; 4]) -> (f64, Vec12, Mat12) {
        let w = self.weights();
        let r = self.difference(x);
        let mut g = Vec12::zeros();
        let mut h = Mat12::zeros();
        for k in 0..4 {
            g.fixed_rows_mut::<3>(3 * k).copy_from(&(r * (2.0 * w[k])));
            for l in 0..4 {
                let c = 2.0 * w[k] * w[l];
                for i in 0..3 {
                    h[(3 * k + i, 3 * l + i)] = c;
                }
            }
        }
        if self.free > 0 {
            let n = self.free;
            let s: Vec<Vec3> = (0..n)
                .map(|m| (0..4).fold(Vec3::zeros(), |acc, k| acc + x[k] * self.dirs[m][k]))
                .collect();
            let mut ftt = Matrix2::<f64>::identity();
            for a in 0..n {
                for b in 0..n {
                    ftt[(a, b)] = 2.0 * s[a].dot(&s[b]);
                }
            }
            let mut fxt = SMatrix::<f64, 12, 2>::zeros();
            for k in 0..4 {
                for m in 0..n {
                    let col = r * (2.0 * self.dirs[m][k]) + s[m] * (2.0 * w[k]);
                    fxt.fixed_view_mut::<3, 1>(3 * k, m).copy_from(&col);
                }
            }
            if let Some(inv) = ftt.try_inverse() {
                h -= fxt * inv * fxt.transpose();
            }
        }
        (r.norm_squared(), g, h)
    }
}

/// Closest point of triangle `t` to `p`: squared distance, region, feature.
pub fn point_triangle_closest(
    p: &Vec3,
    t: &[Vec3; 3],
) -> (f64, PointTriangleRegion, ClosestFeature) {
    let [a, b, c] = *t;
    let ab = b - a;
    let ac = c - a;
    let ap = p - a;
    let d1 = ab.dot(&ap);
    let d2 = ac.dot(&ap);
    let vertex = |k: u8| {
        let mut base = [1.0, 0.0, 0.0, 0.0];
        base[1 + k as usize] = -1.0;
        let f = ClosestFeature::fixed(base);
        let d = (p - t[k as usize]).norm_squared();
        (d, PointTriangleRegion::Vertex(k), f)
    };
    if d1 <= 0.0 && d2 <= 0.0 {
        return vertex(0);
    }
    let bp = p - b;
    let d3 = ab.dot(&bp);
    let d4 = ac.dot(&bp);
    if d3 >= 0.0 && d4 <= d3 {
        return vertex(1);
    }
    let vc = d1 * d4 - d3 * d2;
    if vc <= 0.0 && d1 >= 0.0 && d3 <= 0.0 {
        let s = d1 / (d1 - d3);
        let f = ClosestFeature::one([1.0, -1.0, 0.0, 0.0], [0.0, 1.0, -1.0, 0.0], s);
        return (
            f.difference(&[*p, a, b, c]).norm_squared(),
            PointTriangleRegion::Edge(0),
            f,
        );
    }
    let cp = p - c;
    let d5 = ab.dot(&cp);
    let d6 = ac.dot(&cp);
    if d6 >= 0.0 && d5 <= d6 {
        return vertex(2);
    }
    let vb = d5 * d2 - d1 * d6;
    if vb <= 0.0 && d2 >= 0.0 && d6 <= 0.0 {
        let w = d2 / (d2 - d6);
        // closest = c + s (a - c) with s = 1 - w
        let f = ClosestFeature::one([1.0, 0.0, 0.0, -1.0], [0.0, -1.0, 0.0, 1.0], 1.0 - w);
        return (
            f.difference(&[*p, a, b, c]).norm_squared(),
            PointTriangleRegion::Edge(2),
            f,
        );
    }
    let va = d3 * d6 - d5 * d4;
    if va <= 0.0 && (d4 - d3) >= 0.0 && (d5 - d6) >= 0.0 {
        let s = (d4 - d3) / ((d4 - d3) + (d5 - d6));
        let f = ClosestFeature::one([1.0, 0.0, -1.0, 0.0], [0.0, 0.0, 1.0, -1.0], s);
        return (
            f.difference(&[*p, a, b, c]).norm_squared(),
            PointTriangleRegion::Edge(1),
            f,
        );
    }
    let denom = 1.0 / (va + vb + vc);
    let v = vb * denom;
    let w = vc * denom;
    let f = ClosestFeature::two(
        [1.0, -1.0, 0.0, 0.0],
        [0.0, 1.0, -1.0, 0.0],
        [0.0, 1.0, 0.0, -1.0],
        v,
        w,
    );
    (
        f.difference(&[*p, a, b, c]).norm_squared(),
        PointTriangleRegion::Face,
        f,
    )
}

/// Closest points of segments `a` and `b`: squared distance, region, feature.
pub fn edge_edge_closest(a: &[Vec3; 2], b: &[Vec3; 2]) -> (f64, EdgeEdgeRegion, ClosestFeature) {
    let d1 = a[1] - a[0];
    let d2 = b[1] - b[0];
    let r = a[0] - b[0];
    let aa = d1.norm_squared();
    let ee = d2.norm_squared();
    let f = d2.dot(&r);
    let c = d1.dot(&r);
    let bb = d1.dot(&d2);
    let denom = aa * ee - bb * bb;
    let mut s = if denom > 1e-14 * aa * ee {
        ((bb * f - c * ee) / denom).clamp(0.0, 1.0)
    } else {
        0.0
    };
    let mut t = (bb * s + f) / ee;
    if t < 0.0 {
        t = 0.0;
        s = (-c / aa).clamp(0.0, 1.0);
    } else if t > 1.0 {
        t = 1.0;
        s = ((bb - c) / aa).clamp(0.0, 1.0);
    }
    let end = |v: f64| -> Option<u8> {
        if v <= 0.0 {
            Some(0)
        } else if v >= 1.0 {
            Some(1)
        } else {
            None
        }
    };
    let dir_s = [-1.0, 1.0, 0.0, 0.0];
    let dir_t = [0.0, 0.0, 1.0, -1.0];
    let (region, feat) = match (end(s), end(t)) {
        (Some(i), Some(j)) => {
            let (s, t) = (i as f64, j as f64);
            (
                EdgeEdgeRegion::VertexVertex(i, j),
                ClosestFeature::fixed([1.0 - s, s, -(1.0 - t), -t]),
            )
        }
        (Some(i), None) => {
            let s = i as f64;
            (
                EdgeEdgeRegion::VertexEdge(i),
                ClosestFeature::one([1.0 - s, s, -1.0, 0.0], dir_t, t),
            )
        }
        (None, Some(j)) => {
            let t = j as f64;
            (
                EdgeEdgeRegion::EdgeVertex(j),
                ClosestFeature::one([1.0, 0.0, -(1.0 - t), -t], dir_s, s),
            )
        }
        (None, None) => (
            EdgeEdgeRegion::EdgeEdge,
            ClosestFeature::two([1.0, 0.0, -1.0, 0.0], dir_s, dir_t, s, t),
        ),
    };
    let d = feat.difference(&[a[0], a[1], b[0], b[1]]).norm_squared();
    (d, region, feat)
}

fn check_triangle(t: &[Vec3; 3]) -> Result<()> {
    let ab = t[1] - t[0];
    let ac = t[2] - t[0];
    let scale = ab.norm() * ac.norm();
    if !(scale > 0.0) || ab.cross(&ac).norm() <= 1e-12 * scale {
        return Err(Error::Degenerate("triangle has (near) zero area".into()));
    }
    Ok(())
}

fn check_segment(e: &[Vec3; 2]) -> Result<()> {
    if !((e[1] - e[0]).norm() > 1e-12) {
        return Err(Error::Degenerate("segment has zero length".into()));
    }
    Ok(())
}

/// Unsigned distance from `p` to triangle `tri` and the active closest feature.
pub fn point_triangle_distance(p: &Vec3, tri: &[Vec3; 3]) -> Result<(f64, PointTriangleRegion)> {
    check_triangle(tri)?;
    let (d2, region, _) = point_triangle_closest(p, tri);
    Ok((d2.sqrt(), region))
}

/// Unsigned distance between two segments and the active closest-feature pairing.
pub fn edge_edge_distance(e1: &[Vec3; 2], e2: &[Vec3; 2]) -> Result<(f64, EdgeEdgeRegion)> {
    check_segment(e1)?;
    check_segment(e2)?;
    let (d2, region, _) = edge_edge_closest(e1, e2);
    Ok((d2.sqrt(), region))
}
