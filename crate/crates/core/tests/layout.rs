use layoutsim::geometry::{
    intersecting_triangle_pairs, project_horizontal, BodyGeometry, Rect2, Vec2,
};
use layoutsim::layout::{default_gap, refine_layout, separate_siblings};
use layoutsim::scenes::{acceptance_scene, random_tree_scene, ACCEPTANCE_SCENES};
use layoutsim::{AffineState, Scene};

fn cross_pairs(scene: &Scene, states: &[AffineState]) -> usize {
    let x: Vec<Vec<_>> = scene
        .meshes
        .iter()
        .zip(states)
        .map(|(m, s)| m.vertices().iter().map(|v| s.apply(v)).collect())
        .collect();
    let bodies: Vec<BodyGeometry<'_>> = scene
        .meshes
        .iter()
        .zip(&x)
        .map(|(m, p)| BodyGeometry::new(m, p))
        .collect();
    intersecting_triangle_pairs(&bodies).cross
}

/// Overlap oracle: open intervals intersect on both axes, with `gap` slack.
fn rects_too_close(a: &Rect2, b: &Rect2, gap: f64) -> bool {
    let sep_x = (b.min.x - a.max.x).max(a.min.x - b.max.x);
    let sep_y = (b.min.y - a.max.y).max(a.min.y - b.max.y);
    sep_x.max(sep_y) < gap - 1e-9
}

fn check_postconditions(scene: &Scene, states: &[AffineState], gap: f64) {
    let tree = scene.tree().unwrap();
    let up = scene.config.up();
    let boxes = scene.aabbs(states);
    let rects: Vec<Rect2> = boxes.iter().map(|b| project_horizontal(b, &up)).collect();
    assert_eq!(cross_pairs(scene, states), 0);
    for i in 0..scene.len() {
        if let Some(p) = tree.parent(i) {
            let outer = &rects[p];
            for c in [
                rects[i].min,
                rects[i].max,
                Vec2::new(rects[i].min.x, rects[i].max.y),
                Vec2::new(rects[i].max.x, rects[i].min.y),
            ] {
                assert!(c.x >= outer.min.x - 1e-9 && c.x <= outer.max.x + 1e-9);
                assert!(c.y >= outer.min.y - 1e-9 && c.y <= outer.max.y + 1e-9);
            }
            assert!(up.bottom(&boxes[i]) >= up.top(&boxes[p]) + gap - 1e-9);
        } else {
            assert!(up.bottom(&boxes[i]) >= gap - 1e-9);
        }
    }
    for node in std::iter::once(None).chain((0..scene.len()).map(Some)) {
        let kids = tree.children_of(node);
        for (a, &i) in kids.iter().enumerate() {
            for &j in &kids[a + 1..] {
                assert!(
                    !rects_too_close(&rects[i], &rects[j], gap),
                    "siblings {i} {j}"
                );
            }
        }
    }
}

#[test]
fn random_trees_refine_in_every_seed() {
    for seed in 0..100 {
        let scene = random_tree_scene(seed).unwrap();
        let tree = scene.tree().unwrap();
        let gap = default_gap(&scene);
        let out = refine_layout(&scene, &tree, gap).unwrap_or_else(|e| panic!("seed {seed}: {e}"));
        check_postconditions(&scene, &out.states, gap);
        for (a, b) in out.states.iter().zip(scene.states()) {
            assert_eq!(a.a, b.a, "linear maps untouched");
        }
        let again = refine_layout(&scene.with_states(&out.states), &tree, gap).unwrap();
        assert_eq!(again.states, out.states, "seed {seed} not idempotent");
    }
}

#[test]
fn acceptance_scenes_refine() {
    for name in ACCEPTANCE_SCENES {
        let scene = acceptance_scene(name).unwrap().unwrap();
        let tree = scene.tree().unwrap();
        let gap = default_gap(&scene);
        let out = refine_layout(&scene, &tree, gap).unwrap();
        check_postconditions(&scene, &out.states, gap);
    }
}

#[test]
fn three_rects_resolve_in_two_dimensions() {
    let parent = Rect2::new(Vec2::new(-1.0, -1.0), Vec2::new(1.0, 1.0));
    let r = |x: f64, y: f64| Rect2::from_center(Vec2::new(x, y), Vec2::new(0.4, 0.4));
    let rects = [r(-0.1, 0.0), r(0.0, 0.05), r(0.1, -0.05)];
    let moves = separate_siblings(&rects, Some(&parent), 0.01).unwrap();
    let out: Vec<Rect2> = rects
        .iter()
        .zip(&moves)
        .map(|(a, d)| a.translated(d))
        .collect();
    for i in 0..3 {
        assert!(out[i].inside(&parent, 1e-9));
        for j in i + 1..3 {
            assert!(!rects_too_close(&out[i], &out[j], 0.01));
        }
    }
}
