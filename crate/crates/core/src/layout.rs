//! Intersection-free initial layouts from a coarse placement and a scene tree.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{
    intersecting_triangle_pairs, project_horizontal, Aabb3, BodyGeometry, Rect2, Vec2, Vec3,
};
use crate::scene::{Layout, Scene, SceneTree};
use crate::state::AffineState;

/// Slack on every containment, separation and clearance test.
pub const LAYOUT_TOL: f64 = 1e-12;
pub const MAX_SEPARATION_PASSES: usize = 100;

/// Translation moving `child` into `parent`: the per-axis clamp of its center.
pub fn horizontal_refine_child(
    child: &Rect2,
    parent: &Rect2,
) -> std::result::Result<Vec2, (f64, f64)> {
    let ch = child.half_extents();
    let ph = parent.half_extents();
    for k in 0..2 {
        if ch[k] > ph[k] + LAYOUT_TOL {
            return Err((ch[k], ph[k]));
        }
    }
    let mut d = Vec2::zeros();
    for k in 0..2 {
        if child.min[k] < parent.min[k] - LAYOUT_TOL {
            d[k] = parent.min[k] - child.min[k];
        } else if child.max[k] > parent.max[k] + LAYOUT_TOL {
            d[k] = parent.max[k] - child.max[k];
        }
    }
    Ok(d)
}

/// Lift along the up axis so the child's bottom clears `floor + gap`.
pub fn vertical_lift(child_bottom: f64, floor: f64, gap: f64) -> f64 {
    let need = floor + gap - child_bottom;
    if need > LAYOUT_TOL {
        need
    } else {
        0.0
    }
}

pub fn vertical_refine_child(
    child: &Aabb3,
    parent: &Aabb3,
    gap: f64,
    up: &crate::geometry::UpAxis,
) -> f64 {
    vertical_lift(up.bottom(child), up.top(parent), gap)
}

/// How far along `axis` the rect may move in the negative and positive
/// direction without leaving `bounds`.
fn room(r: &Rect2, bounds: Option<&Rect2>, axis: usize) -> (f64, f64) {
    match bounds {
        None => (f64::INFINITY, f64::INFINITY),
        Some(b) => (
            (r.min[axis] - b.min[axis]).max(0.0),
            (b.max[axis] - r.max[axis]).max(0.0),
        ),
    }
}

/// Amount by which `a` and `b` fall short of `gap` separation on each axis.
fn shortfall(a: &Rect2, b: &Rect2, gap: f64) -> Vec2 {
    let da = a.center() - b.center();
    let s = a.half_extents() + b.half_extents() + Vec2::repeat(gap);
    Vec2::new(s.x - da.x.abs(), s.y - da.y.abs())
}

fn violates(a: &Rect2, b: &Rect2, gap: f64) -> bool {
    let o = shortfall(a, b, gap);
    o.x > LAYOUT_TOL && o.y > LAYOUT_TOL
}

/// Split a push of size `o` between `i` (moving by `-dir`) and `j` (moving by
/// `+dir`); half each, with what one cannot take handed to the other.
fn split_push(o: f64, room_i: f64, room_j: f64) -> Option<(f64, f64)> {
    if room_i + room_j < o - LAYOUT_TOL {
        return None;
    }
    let mut mi = (0.5 * o).min(room_i);
    let mut mj = (0.5 * o).min(room_j);
    let rest = o - mi - mj;
    if rest > 0.0 {
        let extra_i = rest.min(room_i - mi);
        mi += extra_i;
        mj += (rest - extra_i).min(room_j - mj);
    }
    Some((mi, mj))
}

/// Translations that make sibling rects pairwise `gap`-separated while
/// staying inside `parent` (unbounded when `None`). Rects are processed in
/// the given order, which callers sort by id.
pub fn separate_siblings(
    rects: &[Rect2],
    parent: Option<&Rect2>,
    gap: f64,
) -> std::result::Result<Vec<Vec2>, Vec<(usize, usize)>> {
    let n = rects.len();
    if let Some(p) = parent {
        let need: f64 = rects
            .iter()
            .map(|r| (r.max - r.min + Vec2::repeat(gap)).product())
            .sum();
        let have = (p.max - p.min + Vec2::repeat(gap)).product();
        if need > have + LAYOUT_TOL {
            return Err(pairs_violating(rects, gap));
        }
    }
    let mut cur = rects.to_vec();
    for _ in 0..MAX_SEPARATION_PASSES {
        let mut moved = false;
        for i in 0..n {
            for j in i + 1..n {
                if !violates(&cur[i], &cur[j], gap) {
                    continue;
                }
                let o = shortfall(&cur[i], &cur[j], gap);
                let first = if o.x <= o.y { 0 } else { 1 };
                let mut best: Option<(f64, Vec<Rect2>)> = None;
                for axis in [first, 1 - first] {
                    let dir = push_direction(&cur[i], &cur[j], axis);
                    let (ri_neg, ri_pos) = room(&cur[i], parent, axis);
                    let (rj_neg, rj_pos) = room(&cur[j], parent, axis);
                    let (room_i, room_j) = if dir > 0.0 {
                        (ri_neg, rj_pos)
                    } else {
                        (ri_pos, rj_neg)
                    };
                    if let Some((mi, mj)) = split_push(o[axis], room_i, room_j) {
                        let mut trial = cur.clone();
                        push(&mut trial, i, j, axis, dir, mi, mj);
                        let cost = total_overlap(&trial, gap);
                        if best.as_ref().is_none_or(|(c, _)| cost < *c - LAYOUT_TOL) {
                            best = Some((cost, trial));
                        }
                    }
                }
                let resolved = best.is_some();
                if let Some((_, trial)) = best {
                    cur = trial;
                }
                if !resolved {
                    // jostle: push anyway and clamp back, displacing neighbours on later visits
                    let dir = push_direction(&cur[i], &cur[j], first);
                    push(&mut cur, i, j, first, dir, 0.5 * o[first], 0.5 * o[first]);
                    if let Some(p) = parent {
                        for k in [i, j] {
                            let d = horizontal_refine_child(&cur[k], p).unwrap_or_default();
                            cur[k] = cur[k].translated(&d);
                        }
                    }
                }
                moved = true;
            }
        }
        if !moved {
            break;
        }
    }
    let bad = pairs_violating(&cur, gap);
    if !bad.is_empty() {
        return Err(bad);
    }
    Ok(cur.iter().zip(rects).map(|(a, b)| a.min - b.min).collect())
}

/// Sum over pairs of the gap-inflated overlap area.
fn total_overlap(rects: &[Rect2], gap: f64) -> f64 {
    let mut sum = 0.0;
    for i in 0..rects.len() {
        for j in i + 1..rects.len() {
            let o = shortfall(&rects[i], &rects[j], gap);
            if o.x > 0.0 && o.y > 0.0 {
                sum += o.x * o.y;
            }
        }
    }
    sum
}

fn push_direction(a: &Rect2, b: &Rect2, axis: usize) -> f64 {
    if b.center()[axis] >= a.center()[axis] {
        1.0
    } else {
        -1.0
    }
}

/// Move `i` by `-dir * mi` and `j` by `dir * mj` along `axis`.
fn push(cur: &mut [Rect2], i: usize, j: usize, axis: usize, dir: f64, mi: f64, mj: f64) {
    let mut ti = Vec2::zeros();
    let mut tj = Vec2::zeros();
    ti[axis] = -dir * mi;
    tj[axis] = dir * mj;
    cur[i] = cur[i].translated(&ti);
    cur[j] = cur[j].translated(&tj);
}

fn pairs_violating(rects: &[Rect2], gap: f64) -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    for i in 0..rects.len() {
        for j in i + 1..rects.len() {
            if violates(&rects[i], &rects[j], gap) {
                out.push((i, j));
            }
        }
    }
    out
}

/// Translation applied to each object by [`refine_layout`].
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RefinementReport {
    pub gap: f64,
    pub translations: BTreeMap<String, [f64; 3]>,
}

impl RefinementReport {
    pub fn moved(&self) -> impl Iterator<Item = (&String, &[f64; 3])> {
        self.translations
            .iter()
            .filter(|(_, t)| t.iter().any(|&x| x != 0.0))
    }
}

#[derive(Debug, Clone)]
pub struct RefinedLayout {
    /// In scene object order.
    pub states: Vec<AffineState>,
    pub report: RefinementReport,
}

impl RefinedLayout {
    pub fn layout(&self, scene: &Scene) -> Layout {
        Layout::from_ordered(&scene.config, &self.states)
    }
}

/// Default vertical/sibling clearance: 1% of the mean mesh size.
pub fn default_gap(scene: &Scene) -> f64 {
    0.01 * scene.mean_mesh_size()
}

struct Refiner<'a> {
    scene: &'a Scene,
    tree: &'a SceneTree,
    states: Vec<AffineState>,
}

impl Refiner<'_> {
    fn aabb(&self, i: usize) -> Aabb3 {
        let s = &self.states[i];
        Aabb3::from_points(self.scene.meshes[i].vertices().iter().map(|v| s.apply(v)))
            .expect("non-empty mesh")
    }

    fn shift_subtree(&mut self, i: usize, d: &Vec3) {
        if d.iter().all(|&x| x == 0.0) {
            return;
        }
        for k in self.tree.subtree(i) {
            self.states[k].p += d;
        }
    }
}

/// Breadth-first over the tree: clamp each child into its parent's
/// horizontal projection, separate siblings, then lift above the parent
/// (or the ground). Whole subtrees move with their root; only translations
/// change.
pub fn refine_layout(scene: &Scene, tree: &SceneTree, gap: f64) -> Result<RefinedLayout> {
    let up = scene.config.up();
    let ground = scene.config.ground_height();
    let initial = scene.states();
    let mut r = Refiner {
        scene,
        tree,
        states: initial.clone(),
    };
    let ids = tree.ids();
    let mut queue: Vec<Option<usize>> = vec![None];
    let mut head = 0;
    while head < queue.len() {
        let node = queue[head];
        head += 1;
        let mut kids = tree.children_of(node).to_vec();
        if kids.is_empty() {
            continue;
        }
        kids.sort_by(|&a, &b| ids[a].cmp(&ids[b]));
        let parent_box = node.map(|p| r.aabb(p));
        let parent_rect = parent_box.as_ref().map(|b| project_horizontal(b, &up));

        if let Some(pr) = &parent_rect {
            for &c in &kids {
                let cr = project_horizontal(&r.aabb(c), &up);
                let d =
                    horizontal_refine_child(&cr, pr).map_err(|_| Error::ChildExceedsParent {
                        child: ids[c].clone(),
                        parent: ids[node.expect("bounded parent")].clone(),
                    })?;
                r.shift_subtree(c, &up.unproject(&d));
            }
        }

        let rects: Vec<Rect2> = kids
            .iter()
            .map(|&c| project_horizontal(&r.aabb(c), &up))
            .collect();
        let moves = separate_siblings(&rects, parent_rect.as_ref(), gap).map_err(|pairs| {
            Error::SiblingPackingFailed(
                pairs
                    .into_iter()
                    .map(|(a, b)| (ids[kids[a]].clone(), ids[kids[b]].clone()))
                    .collect(),
            )
        })?;
        for (&c, d) in kids.iter().zip(&moves) {
            r.shift_subtree(c, &up.unproject(d));
        }

        let floor = match &parent_box {
            Some(b) => Some(up.top(b)),
            None => ground,
        };
        if let Some(floor) = floor {
            for &c in &kids {
                let lift = vertical_lift(up.bottom(&r.aabb(c)), floor, gap);
                r.shift_subtree(c, &(up.up() * lift));
            }
        }
        queue.extend(kids.into_iter().map(Some));
    }

    let translations = ids
        .iter()
        .enumerate()
        .map(|(i, id)| {
            let d = r.states[i].p - initial[i].p;
            (id.clone(), [d.x, d.y, d.z])
        })
        .collect();
    Ok(RefinedLayout {
        states: r.states,
        report: RefinementReport { gap, translations },
    })
}

/// Lift bodies that intersect others or dip below the ground, in tree
/// order, by the smallest amount that clears the parent (or whatever they
/// intersect). Horizontal positions are left alone.
pub fn repair_layout(
    scene: &Scene,
    tree: &SceneTree,
    states: &[AffineState],
    gap: f64,
) -> Vec<AffineState> {
    let up = scene.config.up();
    let ground = scene.config.ground_height();
    let mut r = Refiner {
        scene,
        tree,
        states: states.to_vec(),
    };
    for i in tree.bfs() {
        let below_ground = |r: &Refiner<'_>| ground.is_some_and(|g| up.bottom(&r.aabb(i)) <= g);
        let hits = r.intersecting(i);
        if hits.is_empty() && !below_ground(&r) {
            continue;
        }
        let floor = match tree.parent(i) {
            Some(p) => Some(up.top(&r.aabb(p))),
            None => ground,
        };
        if let Some(f) = floor {
            let lift = vertical_lift(up.bottom(&r.aabb(i)), f, gap);
            r.shift_subtree(i, &(up.up() * lift));
        }
        let hits = r.intersecting(i);
        if !hits.is_empty() {
            let top = hits
                .iter()
                .map(|&j| up.top(&r.aabb(j)))
                .fold(f64::NEG_INFINITY, f64::max);
            let lift = vertical_lift(up.bottom(&r.aabb(i)), top, gap);
            r.shift_subtree(i, &(up.up() * lift));
        }
    }
    r.states
}

/// Place body `i` for insertion into an existing layout: clamp it into its
/// parent's horizontal projection, lift it above the parent (or the ground),
/// then above anything it still intersects. Other bodies do not move.
pub fn place_object(
    scene: &Scene,
    tree: &SceneTree,
    states: &[AffineState],
    i: usize,
    gap: f64,
) -> Result<AffineState> {
    let up = scene.config.up();
    let mut r = Refiner {
        scene,
        tree,
        states: states.to_vec(),
    };
    let ids = tree.ids();
    let parent = tree.parent(i);
    if let Some(p) = parent {
        let pr = project_horizontal(&r.aabb(p), &up);
        let cr = project_horizontal(&r.aabb(i), &up);
        let d = horizontal_refine_child(&cr, &pr).map_err(|_| Error::ChildExceedsParent {
            child: ids[i].clone(),
            parent: ids[p].clone(),
        })?;
        r.states[i].p += up.unproject(&d);
    }
    let floor = match parent {
        Some(p) => Some(up.top(&r.aabb(p))),
        None => scene.config.ground_height(),
    };
    if let Some(f) = floor {
        let lift = vertical_lift(up.bottom(&r.aabb(i)), f, gap);
        r.states[i].p += up.up() * lift;
    }
    loop {
        let hits = r.intersecting(i);
        if hits.is_empty() {
            break;
        }
        let top = hits
            .iter()
            .map(|&j| up.top(&r.aabb(j)))
            .fold(f64::NEG_INFINITY, f64::max);
        let lift = vertical_lift(up.bottom(&r.aabb(i)), top, gap);
        r.states[i].p += up.up() * lift;
    }
    Ok(r.states[i])
}

impl Refiner<'_> {
    /// Bodies outside the subtree of `i` whose triangles intersect body `i`.
    fn intersecting(&self, i: usize) -> Vec<usize> {
        let xi: Vec<Vec3> = self.scene.meshes[i]
            .vertices()
            .iter()
            .map(|v| self.states[i].apply(v))
            .collect();
        let bi = self.aabb(i);
        let own = self.tree.subtree(i);
        (0..self.states.len())
            .filter(|j| !own.contains(j))
            .filter(|&j| self.aabb(j).intersects(&bi))
            .filter(|&j| {
                let xj: Vec<Vec3> = self.scene.meshes[j]
                    .vertices()
                    .iter()
                    .map(|v| self.states[j].apply(v))
                    .collect();
                let pair = [
                    BodyGeometry::new(&self.scene.meshes[i], &xi),
                    BodyGeometry::new(&self.scene.meshes[j], &xj),
                ];
                intersecting_triangle_pairs(&pair).cross > 0
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rect(cx: f64, cy: f64, hx: f64, hy: f64) -> Rect2 {
        Rect2::from_center(Vec2::new(cx, cy), Vec2::new(hx, hy))
    }

    #[test]
    fn clamp_into_parent() {
        let p = rect(0.0, 0.0, 1.0, 1.0);
        let d = horizontal_refine_child(&rect(0.9, 0.0, 0.3, 0.3), &p).unwrap();
        assert!((d - Vec2::new(-0.2, 0.0)).norm() < 1e-15);
        assert_eq!(
            horizontal_refine_child(&rect(0.1, 0.2, 0.3, 0.3), &p).unwrap(),
            Vec2::zeros()
        );
        assert!(horizontal_refine_child(&rect(0.0, 0.0, 1.2, 0.3), &p).is_err());
    }

    #[test]
    fn lift_arithmetic() {
        assert!((vertical_lift(0.8, 1.0, 0.01) - 0.21).abs() < 1e-15);
        assert_eq!(vertical_lift(1.5, 1.0, 0.01), 0.0);
    }

    #[test]
    fn two_squares_split_symmetrically() {
        let rects = [rect(0.0, 0.0, 0.5, 0.5), rect(0.5, 0.0, 0.5, 0.5)];
        let p = rect(0.0, 0.0, 3.0, 3.0);
        let d = separate_siblings(&rects, Some(&p), 0.01).unwrap();
        let c0 = rects[0].center() + d[0];
        let c1 = rects[1].center() + d[1];
        assert!(((c0.x + c1.x) / 2.0 - 0.25).abs() < 1e-12);
        assert!(((c1 - c0).norm() - 1.01).abs() < 1e-12);
    }

    #[test]
    fn disjoint_rects_do_not_move() {
        let rects = [rect(0.0, 0.0, 0.5, 0.5), rect(2.0, 0.0, 0.5, 0.5)];
        let d = separate_siblings(&rects, None, 0.01).unwrap();
        assert!(d.iter().all(|v| *v == Vec2::zeros()));
    }

    #[test]
    fn overfull_parent_is_rejected() {
        let rects = [rect(0.0, 0.0, 0.5, 0.5), rect(0.1, 0.0, 0.5, 0.5)];
        let p = rect(0.0, 0.0, 0.55, 0.55);
        assert_eq!(separate_siblings(&rects, Some(&p), 0.01), Err(vec![(0, 1)]));
    }
}
