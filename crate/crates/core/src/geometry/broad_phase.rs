//! Spatial-hash culling of primitive pairs.

use std::collections::HashMap;

use super::{Aabb3, TriangleMesh, Vec3};

/// One body as seen by the broad phase: its mesh, current world positions and,
/// for swept queries, the displacement of every vertex over the step.
#[derive(Debug, Clone, Copy)]
pub struct BodyGeometry<'a> {
    pub mesh: &'a TriangleMesh,
    pub positions: &'a [Vec3],
    pub displacement: Option<&'a [Vec3]>,
}

impl<'a> BodyGeometry<'a> {
    pub fn new(mesh: &'a TriangleMesh, positions: &'a [Vec3]) -> Self {
        Self {
            mesh,
            positions,
            displacement: None,
        }
    }

    pub fn swept(mesh: &'a TriangleMesh, positions: &'a [Vec3], displacement: &'a [Vec3]) -> Self {
        Self {
            mesh,
            positions,
            displacement: Some(displacement),
        }
    }

    fn point_box(&self, v: usize) -> Aabb3 {
        let p = self.positions[v];
        match self.displacement {
            Some(d) => {
                let q = p + d[v];
                Aabb3::new(p.inf(&q), p.sup(&q))
            }
            None => Aabb3::new(p, p),
        }
    }

    fn indices_box(&self, idx: &[usize]) -> Aabb3 {
        idx.iter()
            .map(|&v| self.point_box(v))
            .reduce(|a, b| a.merged(&b))
            .expect("primitive has vertices")
    }

    pub fn bounds(&self) -> Aabb3 {
        (0..self.positions.len())
            .map(|v| self.point_box(v))
            .reduce(|a, b| a.merged(&b))
            .expect("body has vertices")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct PointTrianglePair {
    pub vertex_body: usize,
    pub vertex: usize,
    pub tri_body: usize,
    pub tri: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct EdgeEdgePair {
    pub body_a: usize,
    pub edge_a: usize,
    pub body_b: usize,
    pub edge_b: usize,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Candidates {
    pub point_triangle: Vec<PointTrianglePair>,
    pub edge_edge: Vec<EdgeEdgePair>,
}

impl Candidates {
    pub fn is_empty(&self) -> bool {
        self.point_triangle.is_empty() && self.edge_edge.is_empty()
    }

    pub fn len(&self) -> usize {
        self.point_triangle.len() + self.edge_edge.len()
    }
}

type Cell = (i64, i64, i64);

/// Uniform grid of buckets keyed by integer cell coordinates.
#[derive(Debug, Clone)]
pub struct SpatialHash<T> {
    cell: f64,
    buckets: HashMap<Cell, Vec<T>>,
}

impl<T: Copy + Ord> SpatialHash<T> {
    pub fn new(cell: f64) -> Self {
        assert!(cell > 0.0 && cell.is_finite());
        Self {
            cell,
            buckets: HashMap::new(),
        }
    }

    fn range(&self, b: &Aabb3) -> (Cell, Cell) {
        let lo = b.min / self.cell;
        let hi = b.max / self.cell;
        (
            (
                lo.x.floor() as i64,
                lo.y.floor() as i64,
                lo.z.floor() as i64,
            ),
            (
                hi.x.floor() as i64,
                hi.y.floor() as i64,
                hi.z.floor() as i64,
            ),
        )
    }

    pub fn insert(&mut self, b: &Aabb3, item: T) {
        let (lo, hi) = self.range(b);
        for i in lo.0..=hi.0 {
            for j in lo.1..=hi.1 {
                for k in lo.2..=hi.2 {
                    self.buckets.entry((i, j, k)).or_default().push(item);
                }
            }
        }
    }

    /// Sorted, de-duplicated items whose cells overlap `b`.
    pub fn query(&self, b: &Aabb3, out: &mut Vec<T>) {
        out.clear();
        let (lo, hi) = self.range(b);
        for i in lo.0..=hi.0 {
            for j in lo.1..=hi.1 {
                for k in lo.2..=hi.2 {
                    if let Some(items) = self.buckets.get(&(i, j, k)) {
                        out.extend_from_slice(items);
                    }
                }
            }
        }
        out.sort_unstable();
        out.dedup();
    }
}

/// All point–triangle and edge–edge pairs whose (swept) boxes come within
/// `inflation` of each other. Pairs on one body are only reported when
/// `self_contact` is set, and never when the primitives share a vertex.
pub fn broad_phase(bodies: &[BodyGeometry<'_>], inflation: f64, self_contact: bool) -> Candidates {
    assert!(inflation >= 0.0);
    let mut out = Candidates::default();
    if bodies.is_empty() {
        return out;
    }
    let bounds: Vec<Aabb3> = bodies
        .iter()
        .map(|b| b.bounds().inflated(inflation))
        .collect();
    let active = |a: usize, b: usize| {
        if a == b {
            self_contact
        } else {
            bounds[a].intersects(&bounds[b])
        }
    };
    if !(0..bodies.len()).any(|a| (0..bodies.len()).any(|b| active(a, b))) {
        return out;
    }

    let mut size_sum = 0.0;
    let mut count = 0usize;
    for b in bodies {
        for e in b.mesh.edges() {
            size_sum += b.indices_box(e).extent().max();
            count += 1;
        }
    }
    let cell = (size_sum / count.max(1) as f64 + 2.0 * inflation).max(1e-9);

    let mut tris: SpatialHash<(usize, usize)> = SpatialHash::new(cell);
    let mut edges: SpatialHash<(usize, usize)> = SpatialHash::new(cell);
    for (bi, b) in bodies.iter().enumerate() {
        for (t, tri) in b.mesh.triangles().iter().enumerate() {
            tris.insert(&b.indices_box(tri).inflated(inflation), (bi, t));
        }
        for (e, edge) in b.mesh.edges().iter().enumerate() {
            edges.insert(&b.indices_box(edge).inflated(inflation), (bi, e));
        }
    }

    let mut hits = Vec::new();
    for (vb, b) in bodies.iter().enumerate() {
        for v in 0..b.positions.len() {
            let pb = b.point_box(v);
            tris.query(&pb, &mut hits);
            for &(tb, t) in &hits {
                if !active(vb, tb) {
                    continue;
                }
                let tri = bodies[tb].mesh.triangles()[t];
                if tb == vb && tri.contains(&v) {
                    continue;
                }
                if !bodies[tb]
                    .indices_box(&tri)
                    .inflated(inflation)
                    .intersects(&pb)
                {
                    continue;
                }
                out.point_triangle.push(PointTrianglePair {
                    vertex_body: vb,
                    vertex: v,
                    tri_body: tb,
                    tri: t,
                });
            }
        }
        for (ea, edge) in b.mesh.edges().iter().enumerate() {
            let eb_box = b.indices_box(edge);
            edges.query(&eb_box, &mut hits);
            for &(bb, eb) in &hits {
                if (bb, eb) <= (vb, ea) || !active(vb, bb) {
                    continue;
                }
                let other = bodies[bb].mesh.edges()[eb];
                if bb == vb && (other.contains(&edge[0]) || other.contains(&edge[1])) {
                    continue;
                }
                if !bodies[bb]
                    .indices_box(&other)
                    .inflated(inflation)
                    .intersects(&eb_box)
                {
                    continue;
                }
                out.edge_edge.push(EdgeEdgePair {
                    body_a: vb,
                    edge_a: ea,
                    body_b: bb,
                    edge_b: eb,
                });
            }
        }
    }
    out.point_triangle.sort_unstable();
    out.edge_edge.sort_unstable();
    out
}
