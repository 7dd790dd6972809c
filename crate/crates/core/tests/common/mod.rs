//! Oracles and scene fixtures shared by the integration tests and the
//! acceptance harness. Every check returns `Ok(detail)` or `Err(reason)`.
#![allow(dead_code)]

use std::collections::HashSet;
use std::sync::Arc;
use std::time::Instant;

use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use layoutsim::diffsim::{NormalForce, StepJacobian};
use layoutsim::edit::{edit_and_settle, Edit, NewObject};
use layoutsim::geometry::shapes::cuboid;
use layoutsim::geometry::{
    project_horizontal, triangles_intersect, Rect2, TriangleMesh, Vec2, Vec3,
};
use layoutsim::layout::{default_gap, refine_layout};
use layoutsim::metrics::{penetration_ratio, scene_displacement};
use layoutsim::objective::{local_loss, loss_and_gradient, total_loss, LossMode, OptimizerConfig};
use layoutsim::pipeline::run_pipeline;
use layoutsim::scene::{ObjectSpec, Parent, RelationKind, GROUND};
use layoutsim::scenes::{
    acceptance_scene, random_tree_scene, three_book_stack, SceneBuilder, ACCEPTANCE_SCENES,
};
use layoutsim::sim::{
    simulate_to_equilibrium, SimulateOptions, StepContext, System, Term, Trajectory,
};
use layoutsim::state::{stack, unstack};
use layoutsim::{AffineState, Scene};

pub type Check = Result<String, String>;

pub fn ensure(ok: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg())
    }
}

pub fn posed(meshes: &[Arc<TriangleMesh>], states: &[AffineState]) -> Vec<Vec<Vec3>> {
    meshes
        .iter()
        .zip(states)
        .map(|(m, s)| m.vertices().iter().map(|v| s.apply(v)).collect())
        .collect()
}

/// Cross-object intersecting triangle pairs by testing every pair of
/// triangles, with no broad phase.
pub fn brute_force_cross_pairs(meshes: &[Arc<TriangleMesh>], states: &[AffineState]) -> usize {
    let x = posed(meshes, states);
    let tri = |b: usize, t: &[usize; 3]| [x[b][t[0]], x[b][t[1]], x[b][t[2]]];
    let mut n = 0;
    for a in 0..meshes.len() {
        for b in a + 1..meshes.len() {
            for ta in meshes[a].triangles() {
                for tb in meshes[b].triangles() {
                    if triangles_intersect(&tri(a, ta), &tri(b, tb)) {
                        n += 1;
                    }
                }
            }
        }
    }
    n
}

/// Mean length over unique undirected edges, rebuilt from the triangles.
pub fn hand_mean_edge_length(meshes: &[Arc<TriangleMesh>], states: &[AffineState]) -> f64 {
    let x = posed(meshes, states);
    let mut sum = 0.0;
    let mut n = 0;
    for (b, m) in meshes.iter().enumerate() {
        let mut seen = HashSet::new();
        for t in m.triangles() {
            for (i, j) in [(t[0], t[1]), (t[1], t[2]), (t[2], t[0])] {
                if seen.insert((i.min(j), i.max(j))) {
                    sum += (x[b][i] - x[b][j]).norm();
                    n += 1;
                }
            }
        }
    }
    sum / n as f64
}

fn rects_too_close(a: &Rect2, b: &Rect2, gap: f64) -> bool {
    let sep_x = (b.min.x - a.max.x).max(a.min.x - b.max.x);
    let sep_y = (b.min.y - a.max.y).max(a.min.y - b.max.y);
    sep_x.max(sep_y) < gap - 1e-9
}

/// Refinement postconditions: no cross-object intersections, children
/// inside their parent's projection and above its top, roots above the
/// ground, siblings separated by `gap`.
pub fn layout_violation(scene: &Scene, states: &[AffineState], gap: f64) -> Option<String> {
    let tree = scene.tree().ok()?;
    let up = scene.config.up();
    let boxes = scene.aabbs(states);
    let rects: Vec<Rect2> = boxes.iter().map(|b| project_horizontal(b, &up)).collect();
    let pairs = brute_force_cross_pairs(&scene.meshes, states);
    if pairs > 0 {
        return Some(format!("{pairs} intersecting pairs"));
    }
    let ids = scene.ids();
    for i in 0..scene.len() {
        if let Some(p) = tree.parent(i) {
            let (c, o) = (&rects[i], &rects[p]);
            let corners = [
                c.min,
                c.max,
                Vec2::new(c.min.x, c.max.y),
                Vec2::new(c.max.x, c.min.y),
            ];
            if corners.iter().any(|k| {
                k.x < o.min.x - 1e-9
                    || k.x > o.max.x + 1e-9
                    || k.y < o.min.y - 1e-9
                    || k.y > o.max.y + 1e-9
            }) {
                return Some(format!("{} leaves the projection of {}", ids[i], ids[p]));
            }
            if up.bottom(&boxes[i]) < up.top(&boxes[p]) + gap - 1e-9 {
                return Some(format!("{} is not above {}", ids[i], ids[p]));
            }
        } else if up.bottom(&boxes[i]) < gap - 1e-9 {
            return Some(format!("{} is not above the ground", ids[i]));
        }
    }
    for node in std::iter::once(None).chain((0..scene.len()).map(Some)) {
        let kids = tree.children_of(node);
        for (a, &i) in kids.iter().enumerate() {
            for &j in &kids[a + 1..] {
                if rects_too_close(&rects[i], &rects[j], gap) {
                    return Some(format!("siblings {} and {} overlap", ids[i], ids[j]));
                }
            }
        }
    }
    None
}

pub fn check_layout_init(seeds: u64) -> Check {
    let mut moved = 0;
    for seed in 0..seeds {
        let scene = random_tree_scene(seed).map_err(|e| format!("seed {seed}: {e}"))?;
        let tree = scene.tree().map_err(|e| e.to_string())?;
        let gap = default_gap(&scene);
        let out = refine_layout(&scene, &tree, gap).map_err(|e| format!("seed {seed}: {e}"))?;
        if let Some(v) = layout_violation(&scene, &out.states, gap) {
            return Err(format!("seed {seed}: {v}"));
        }
        ensure(
            out.states
                .iter()
                .zip(scene.states())
                .all(|(a, b)| a.a == b.a),
            || format!("seed {seed}: linear map changed"),
        )?;
        let again = refine_layout(&scene.with_states(&out.states), &tree, gap)
            .map_err(|e| e.to_string())?;
        ensure(again.states == out.states, || {
            format!("seed {seed}: not idempotent")
        })?;
        moved += out.report.moved().count();
    }
    Ok(format!(
        "{seeds}/{seeds} seeds valid and idempotent ({moved} objects moved)"
    ))
}

// ---------------------------------------------------------------- gradients

/// Parameters for fixed-length, tightly solved runs: no rest detection, so
/// every perturbed run has the same frame count.
pub fn tight(scene: Scene) -> Scene {
    let mut s = scene;
    s.config.sim_params.solve_tol = 2e-9;
    s.config.sim_params.rest_tol = 1e-300;
    s.config.sim_params.max_newton_iterations = 400;
    s
}

/// Stacks that rest in contact with the top body overhanging its container,
/// so the loss is positive and every contact stays closed.
pub fn gradient_scenes() -> Vec<(&'static str, Scene)> {
    let gap = 3e-4;
    let cubes = SceneBuilder::new()
        .object(
            "base",
            cuboid(Vec3::new(0.03, 0.03, 0.03)),
            [0.0, 0.03 + gap, 0.0],
        )
        .on("base", GROUND)
        .object(
            "top",
            cuboid(Vec3::new(0.02, 0.02, 0.02)),
            [0.015, 0.08 + 2.0 * gap, -0.012],
        )
        .on("top", "base")
        .build()
        .expect("valid scene");
    let slabs = SceneBuilder::new()
        .object(
            "slab",
            cuboid(Vec3::new(0.1, 0.01, 0.08)),
            [0.0, 0.01 + gap, 0.0],
        )
        .on("slab", GROUND)
        .object(
            "tile",
            cuboid(Vec3::new(0.06, 0.008, 0.05)),
            [0.05, 0.028 + 2.0 * gap, 0.035],
        )
        .on("tile", "slab")
        .build()
        .expect("valid scene");
    let tower = SceneBuilder::new()
        .object(
            "a",
            cuboid(Vec3::new(0.03, 0.015, 0.03)),
            [0.0, 0.015 + gap, 0.0],
        )
        .on("a", GROUND)
        .object(
            "b",
            cuboid(Vec3::new(0.025, 0.015, 0.025)),
            [0.01, 0.045 + 2.0 * gap, 0.0],
        )
        .on("b", "a")
        .object(
            "c",
            cuboid(Vec3::new(0.02, 0.015, 0.02)),
            [0.018, 0.075 + 3.0 * gap, 0.01],
        )
        .on("c", "b")
        .build()
        .expect("valid scene");
    vec![
        ("offset-cubes", tight(cubes)),
        ("offset-slabs", tight(slabs)),
        ("tower", tight(tower)),
    ]
}

pub const GRADIENT_FRAMES: usize = 12;

pub fn gradient_config() -> OptimizerConfig {
    OptimizerConfig {
        loss_frame_interval: 5,
        loss_mode: LossMode::Accumulated,
        ..Default::default()
    }
}

fn fixed_loss(scene: &Scene, system: &System, q0: &DVector<f64>) -> Result<f64, String> {
    let tree = scene.tree().map_err(|e| e.to_string())?;
    let (l, _, traj) = loss_and_gradient(
        scene,
        &tree,
        system,
        q0,
        &gradient_config(),
        Some(GRADIENT_FRAMES),
    )
    .map_err(|e| e.to_string())?;
    ensure(traj.frames() == GRADIENT_FRAMES + 1, || {
        "run ended early".into()
    })?;
    Ok(l)
}

/// Relative error of the adjoint gradient against central differences over
/// the translations of the last two bodies.
pub fn end_to_end_gradient_error(scene: &Scene, h: f64) -> Result<(f64, f64), String> {
    let system = System::from_scene(scene).map_err(|e| e.to_string())?;
    let tree = scene.tree().map_err(|e| e.to_string())?;
    let q0 = stack(&scene.states());
    let (loss, grad, _) = loss_and_gradient(
        scene,
        &tree,
        &system,
        &q0,
        &gradient_config(),
        Some(GRADIENT_FRAMES),
    )
    .map_err(|e| e.to_string())?;
    ensure(loss > 0.0, || {
        "loss vanished; scene does not exercise the gradient".into()
    })?;
    let n = scene.len();
    let (top, below) = (12 * (n - 1), 12 * (n - 2));
    let coords = [top, top + 1, top + 2, below, below + 1, below + 2];
    let mut diff = 0.0;
    let mut norm = 0.0;
    for &k in &coords {
        let mut qp = q0.clone();
        qp[k] += h;
        let mut qm = q0.clone();
        qm[k] -= h;
        let fd = (fixed_loss(scene, &system, &qp)? - fixed_loss(scene, &system, &qm)?) / (2.0 * h);
        diff += (grad[k] - fd).powi(2);
        norm += fd * fd;
    }
    ensure(norm > 0.0, || "finite differences vanished".into())?;
    Ok(((diff / norm).sqrt(), loss))
}

/// Relative error of one step's Jacobian action against central differences
/// of the step map, after the scene has settled for a few frames. The
/// differenced map matches the Jacobian's treatment of normal forces: the
/// true forward step for `Differentiated`, and for `Lagged` a step that keeps
/// the start-of-step friction data apart from the reference positions.
pub fn step_jacobian_error(
    scene: &Scene,
    seed: u64,
    h: f64,
    normal: NormalForce,
) -> Result<f64, String> {
    let system = System::from_scene(scene).map_err(|e| e.to_string())?;
    let warm = simulate_to_equilibrium(
        &system,
        &stack(&scene.states()),
        SimulateOptions {
            max_frames: Some(6),
            ..Default::default()
        },
    )
    .map_err(|e| e.to_string())?;
    let q_n = warm.last().clone();
    let r = system.step(&q_n).map_err(|e| e.to_string())?;
    let jac = StepJacobian::with_normal_force(&system, &q_n, &r.q, &r.friction, normal)
        .map_err(|e| e.to_string())?;
    let frozen = normal == NormalForce::Lagged;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let v = DVector::from_fn(q_n.len(), |k, _| {
        if k % 12 < 3 {
            rng.random_range(-1.0..1.0)
        } else {
            0.1 * rng.random_range(-1.0..1.0)
        }
    });
    let jv = jac.apply(&v).map_err(|e| e.to_string())?;
    let step = |q: DVector<f64>| -> Result<DVector<f64>, String> {
        let out = if frozen {
            let mut friction = r.friction.clone();
            let pos = system.positions(&q);
            for c in &mut friction.contacts {
                for k in 0..c.len {
                    let (b, v) = c.stencil[k];
                    c.x0[k] = pos[b][v];
                }
            }
            let ctx = StepContext {
                q_tilde: system.predictive(&q),
                q_n: q,
                friction,
            };
            system.solve(ctx)
        } else {
            system.step(&q)
        };
        out.map(|r| r.q).map_err(|e| e.to_string())
    };
    let fd = (step(&q_n + &v * h)? - step(&q_n - &v * h)?) / (2.0 * h);
    Ok((jv - &fd).norm() / fd.norm())
}

/// Largest relative error of the Ψ, B and D gradients against central
/// differences at randomized states near contact.
pub fn energy_gradient_errors(scene: &Scene, seed: u64) -> Result<[f64; 3], String> {
    let system = System::from_scene(scene).map_err(|e| e.to_string())?;
    let q_ref = stack(&scene.states());
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut jitter = |scale_p: f64, scale_a: f64| {
        DVector::from_fn(q_ref.len(), |k, _| {
            let s = if k % 12 < 3 { scale_p } else { scale_a };
            s * rng.random_range(-1.0..1.0)
        })
    };
    let q_n = &q_ref + jitter(2e-5, 1e-4);
    let ctx = system.context(&q_n).map_err(|e| e.to_string())?;
    ensure(!ctx.friction.contacts.is_empty(), || {
        "no friction contacts at the sample state".into()
    })?;
    let q = &q_n + jitter(1e-5, 1e-5);
    let mut out = [0.0; 3];
    for (slot, term) in [Term::Shape, Term::Barrier, Term::Friction]
        .into_iter()
        .enumerate()
    {
        let (_, g, _) = system
            .term(term, &q, &ctx, false, false)
            .map_err(|e| e.to_string())?;
        let h = 1e-8;
        let mut fd = DVector::zeros(q.len());
        for k in 0..q.len() {
            let mut qp = q.clone();
            qp[k] += h;
            let mut qm = q.clone();
            qm[k] -= h;
            let vp = system
                .term(term, &qp, &ctx, false, false)
                .map_err(|e| e.to_string())?
                .0;
            let vm = system
                .term(term, &qm, &ctx, false, false)
                .map_err(|e| e.to_string())?
                .0;
            fd[k] = (vp - vm) / (2.0 * h);
        }
        ensure(g.norm() > 0.0, || format!("{term:?} gradient vanished"))?;
        out[slot] = (g - &fd).norm() / fd.norm();
    }
    Ok(out)
}

pub fn check_gradients() -> Check {
    let scenes = gradient_scenes();
    let mut worst_e2e: f64 = 0.0;
    let mut worst_step: f64 = 0.0;
    let mut worst_energy: f64 = 0.0;
    for (name, scene) in &scenes {
        let (e, _) = end_to_end_gradient_error(scene, 1e-6).map_err(|e| format!("{name}: {e}"))?;
        ensure(e < 1e-2, || {
            format!("{name}: end-to-end relative error {e:.2e}")
        })?;
        worst_e2e = worst_e2e.max(e);
        for seed in 0..2 {
            let s = step_jacobian_error(scene, seed, 1e-7, NormalForce::Differentiated)
                .map_err(|e| format!("{name}: {e}"))?;
            ensure(s < 1e-3, || {
                format!("{name}: step Jacobian relative error {s:.2e}")
            })?;
            worst_step = worst_step.max(s);
            let errs = energy_gradient_errors(scene, seed).map_err(|e| format!("{name}: {e}"))?;
            for (term, e) in ["shape", "barrier", "friction"].iter().zip(errs) {
                ensure(e < 1e-4, || {
                    format!("{name}: {term} gradient relative error {e:.2e}")
                })?;
                worst_energy = worst_energy.max(e);
            }
        }
    }
    Ok(format!(
        "{} scenes x 6 coords: end-to-end {worst_e2e:.1e}, step {worst_step:.1e}, energies {worst_energy:.1e}",
        scenes.len()
    ))
}

// ------------------------------------------------------------- simulation

pub fn simulate(scene: &Scene, states: &[AffineState]) -> Result<(System, Trajectory), String> {
    let system = System::from_scene(scene).map_err(|e| e.to_string())?;
    let traj = simulate_to_equilibrium(&system, &stack(states), SimulateOptions::default())
        .map_err(|e| e.to_string())?;
    Ok((system, traj))
}

/// Every frame free of cross-object intersections, and every step's
/// accepted Newton energies non-increasing.
pub fn trajectory_violation(scene: &Scene, traj: &Trajectory) -> Option<String> {
    for (t, q) in traj.states.iter().enumerate() {
        let pairs = brute_force_cross_pairs(&scene.meshes, &unstack(q));
        if pairs > 0 {
            return Some(format!("frame {t}: {pairs} intersecting pairs"));
        }
    }
    for (t, s) in traj.steps.iter().enumerate() {
        for w in s.energies.windows(2) {
            if w[1] > w[0] + 1e-12 * w[0].abs().max(1e-12) {
                return Some(format!("step {t}: energy rose from {} to {}", w[0], w[1]));
            }
        }
    }
    None
}

pub fn force_free_drop() -> Result<f64, String> {
    let scene = SceneBuilder::new()
        .object("cube", cuboid(Vec3::repeat(0.05)), [0.0, 1.0, 0.0])
        .configure(|c| c.ground.enabled = false)
        .build()
        .map_err(|e| e.to_string())?;
    let system = System::from_scene(&scene).map_err(|e| e.to_string())?;
    let q0 = stack(&scene.states());
    let r = system.step(&q0).map_err(|e| e.to_string())?;
    Ok(r.q[1] - q0[1])
}

pub fn check_simulator_invariants() -> Check {
    let mut frames = 0;
    let mut steps = 0;
    for name in ACCEPTANCE_SCENES {
        let scene = acceptance_scene(name)
            .expect("known")
            .map_err(|e| e.to_string())?;
        let tree = scene.tree().map_err(|e| e.to_string())?;
        let refined = refine_layout(&scene, &tree, default_gap(&scene))
            .map_err(|e| format!("{name}: {e}"))?;
        let (_, traj) = simulate(&scene, &refined.states).map_err(|e| format!("{name}: {e}"))?;
        if let Some(v) = trajectory_violation(&scene, &traj) {
            return Err(format!("{name}: {v}"));
        }
        frames += traj.frames();
        steps += traj.steps.iter().map(|s| s.energies.len()).sum::<usize>();
    }
    let dy = force_free_drop()?;
    let expected = -0.03 * 0.03 * 9.8;
    ensure((dy - expected).abs() < 1e-12, || {
        format!("force-free step moved {dy} m, expected {expected}")
    })?;
    Ok(format!("{frames} frames intersection-free, {steps} line-search energies monotone, free-fall dy = {dy:.6} m"))
}

/// A 5 cm cube released with its bottom 0.1 m above the ground: frames used
/// and final gap.
pub fn dropped_cube() -> Result<(usize, f64, f64, bool), String> {
    let scene = SceneBuilder::new()
        .object("cube", cuboid(Vec3::repeat(0.025)), [0.0, 0.125, 0.0])
        .on("cube", GROUND)
        .build()
        .map_err(|e| e.to_string())?;
    let (system, traj) = simulate(&scene, &scene.states())?;
    let last = unstack(traj.last());
    let bottom = scene.aabbs(&last)[0].min.y;
    Ok((
        traj.frames() - 1,
        bottom,
        system.params.dhat,
        traj.converged,
    ))
}

/// A block on a box pedestal with its center of mass at `x`; returns the
/// block's lowest point and its total translation.
pub fn block_on_pedestal(x: f64) -> Result<(f64, f64, f64, bool), String> {
    let gap = 3e-4;
    let scene = SceneBuilder::new()
        .object(
            "pedestal",
            cuboid(Vec3::new(0.04, 0.03, 0.04)),
            [0.0, 0.03 + gap, 0.0],
        )
        .on("pedestal", GROUND)
        .object(
            "block",
            cuboid(Vec3::repeat(0.015)),
            [x, 0.075 + 2.0 * gap, 0.0],
        )
        .on("block", "pedestal")
        .build()
        .map_err(|e| e.to_string())?;
    let (system, traj) = simulate(&scene, &scene.states())?;
    let first = unstack(&traj.states[0]);
    let last = unstack(traj.last());
    let bottom = scene.aabbs(&last)[1].min.y;
    Ok((
        bottom,
        (last[1].p - first[1].p).norm(),
        system.params.dhat,
        traj.converged,
    ))
}

pub fn check_equilibrium_oracle() -> Check {
    let (frames, gap, dhat, converged) = dropped_cube()?;
    ensure(converged && frames <= 300, || {
        format!("drop did not converge ({frames} frames)")
    })?;
    ensure(gap > 0.0 && gap < dhat, || {
        format!("resting gap {gap:.3e} outside (0, {dhat:.1e})")
    })?;
    let (bottom, _, dhat_p, conv) = block_on_pedestal(0.05)?;
    ensure(conv, || "toppling block did not settle".into())?;
    ensure(bottom < 2.0 * dhat_p, || {
        format!("toppled block rests {bottom:.4} m above the ground")
    })?;
    let (bottom_s, moved, _, conv_s) = block_on_pedestal(0.02)?;
    ensure(conv_s, || "supported block did not settle".into())?;
    ensure(bottom_s > 0.06 && moved < 1e-3, || {
        format!("supported block moved {moved:.2e} m")
    })?;
    Ok(format!(
        "drop rests after {frames} frames at gap {gap:.2e} m; unsupported block lands at {bottom:.1e} m; supported block moves {moved:.1e} m"
    ))
}

// ---------------------------------------------------------------- metrics

fn single_triangle() -> Arc<TriangleMesh> {
    let a = 2.0 / 3f64.sqrt();
    Arc::new(
        TriangleMesh::new(
            vec![Vec3::zeros(), Vec3::new(a, a, 0.0), Vec3::new(a, 0.0, a)],
            vec![[0, 1, 2]],
        )
        .expect("valid triangle"),
    )
}

fn slab_pair(offset: f64) -> (Vec<Arc<TriangleMesh>>, Vec<AffineState>) {
    let slab = Arc::new(cuboid(Vec3::new(0.5, 0.05, 0.3)).subdivided());
    let states = vec![
        AffineState::identity(),
        AffineState::from_translation(Vec3::new(0.3, offset, 0.1)),
    ];
    (vec![slab.clone(), slab], states)
}

pub fn check_metrics() -> Check {
    // static trajectories
    let (meshes, states) = slab_pair(0.2);
    let d = scene_displacement(&meshes, &vec![states.clone(); 5]).map_err(|e| e.to_string())?;
    ensure(d == 0.0, || format!("static D = {d}"))?;

    // every vertex travels 0.5 in a scene of diagonal 2
    let tri = vec![single_triangle()];
    let path: Vec<Vec<AffineState>> = (0..3)
        .map(|k| {
            vec![AffineState::from_translation(Vec3::new(
                0.25 * k as f64,
                0.0,
                0.0,
            ))]
        })
        .collect();
    let d = scene_displacement(&tri, &path).map_err(|e| e.to_string())?;
    ensure((d - 0.25).abs() < 1e-12, || {
        format!("single-body D = {d}, expected 0.25")
    })?;

    // translation and a quarter turn leave the bounding-box diagonal unchanged
    let (meshes, s0) = slab_pair(0.2);
    let frames: Vec<Vec<AffineState>> = (0..4)
        .map(|k| {
            s0.iter()
                .enumerate()
                .map(|(b, s)| {
                    AffineState::new(s.p + Vec3::new(0.01 * k as f64 * b as f64, 0.0, 0.0), s.a)
                })
                .collect()
        })
        .collect();
    let rot = nalgebra::Rotation3::from_axis_angle(&Vec3::y_axis(), std::f64::consts::FRAC_PI_2)
        .into_inner();
    let shift = Vec3::new(1.0, -2.0, 0.5);
    let moved: Vec<Vec<AffineState>> = frames
        .iter()
        .map(|f| {
            f.iter()
                .map(|s| AffineState::new(rot * s.p + shift, rot * s.a))
                .collect()
        })
        .collect();
    let (d0, d1) = (
        scene_displacement(&meshes, &frames).map_err(|e| e.to_string())?,
        scene_displacement(&meshes, &moved).map_err(|e| e.to_string())?,
    );
    ensure((d0 - d1).abs() < 1e-12 * d0.max(1.0), || {
        format!("D changed under rigid motion: {d0} vs {d1}")
    })?;

    // R on disjoint and self-only scenes
    let r = penetration_ratio(&meshes, &s0).map_err(|e| e.to_string())?;
    ensure(r == 0.0, || format!("disjoint R = {r}"))?;
    let a = cuboid(Vec3::repeat(0.1));
    let b = a.translated(&Vec3::new(0.05, 0.05, 0.0));
    let knot = Arc::new(TriangleMesh::merge(&[a, b]).map_err(|e| e.to_string())?);
    let far = Arc::new(cuboid(Vec3::repeat(0.1)));
    let self_only = vec![knot, far];
    let s = vec![
        AffineState::identity(),
        AffineState::from_translation(Vec3::new(1.0, 0.0, 0.0)),
    ];
    let r = penetration_ratio(&self_only, &s).map_err(|e| e.to_string())?;
    ensure(r == 0.0, || format!("self-intersection-only R = {r}"))?;

    // overlapping slabs against the hand-assembled formula
    let (meshes, states) = slab_pair(0.05);
    let pairs = brute_force_cross_pairs(&meshes, &states);
    ensure(pairs > 0, || "slabs do not overlap".into())?;
    let l = {
        let x = posed(&meshes, &states);
        let all: Vec<Vec3> = x.into_iter().flatten().collect();
        let min = all
            .iter()
            .fold(Vec3::repeat(f64::INFINITY), |m, v| m.inf(v));
        let max = all
            .iter()
            .fold(Vec3::repeat(f64::NEG_INFINITY), |m, v| m.sup(v));
        (max - min).norm()
    };
    let le = hand_mean_edge_length(&meshes, &states) * 2.0 / l;
    let expected = pairs as f64 * le / 2.0;
    let r = penetration_ratio(&meshes, &states).map_err(|e| e.to_string())?;
    ensure((r - expected).abs() < 1e-9 * expected, || {
        format!("R = {r}, formula gives {expected}")
    })?;
    Ok(format!("D static/arithmetic/rigid ok; R disjoint/self-only 0; two-slab R = {r:.4} from {pairs} pairs"))
}

// ------------------------------------------------------------------ edits

/// The three-book stack at the equilibrium the full pipeline delivers.
pub fn settled_books() -> Result<Scene, String> {
    let scene = three_book_stack().map_err(|e| e.to_string())?;
    let out =
        run_pipeline(&scene, true, &OptimizerConfig::default(), None).map_err(|e| e.to_string())?;
    ensure(out.summary.metrics.D < 1e-3, || {
        "books did not settle".into()
    })?;
    Ok(scene.with_states(&out.layout))
}

pub fn top_book() -> NewObject {
    let spec = ObjectSpec::new(
        "book-top",
        "meshes/book-top.obj",
        &AffineState::from_translation(Vec3::new(0.0, 0.0, 0.0)),
    );
    NewObject {
        spec,
        mesh: Arc::new(cuboid(Vec3::new(0.07, 0.012, 0.05))),
        parent: Parent::Object("book-small".into()),
        kind: RelationKind::On,
    }
}

pub fn scene_loss(scene: &Scene) -> Result<f64, String> {
    let tree = scene.tree().map_err(|e| e.to_string())?;
    Ok(total_loss(
        &scene.meshes,
        &tree,
        &scene.config.up(),
        &stack(&scene.states()),
    )
    .0)
}

/// Containment loss of one object against its tree parent.
pub fn object_loss(scene: &Scene, id: &str) -> Result<f64, String> {
    let tree = scene.tree().map_err(|e| e.to_string())?;
    let i = scene
        .config
        .index_of(id)
        .ok_or_else(|| format!("no object {id}"))?;
    let Some(p) = tree.parent(i) else {
        return Ok(0.0);
    };
    let up = scene.config.up();
    let boxes = scene.aabbs(&scene.states());
    Ok(local_loss(
        &project_horizontal(&boxes[i], &up),
        &project_horizontal(&boxes[p], &up),
    ))
}

pub fn check_edit_sequence() -> Check {
    let base = settled_books()?;
    let deleted = edit_and_settle(&base, &Edit::Delete("book-large".into()), None)
        .map_err(|e| e.to_string())?;
    let s = &deleted.summary;
    ensure(s.converged && s.metrics.R == 0.0, || {
        format!("delete: converged {} R {}", s.converged, s.metrics.R)
    })?;
    let boxes = deleted.scene.aabbs(&deleted.scene.states());
    let i = deleted
        .scene
        .config
        .index_of("book-medium")
        .expect("still present");
    ensure(boxes[i].min.y < 0.01, || {
        format!(
            "book-medium rests at {:.4} m, not on the ground",
            boxes[i].min.y
        )
    })?;
    let added =
        edit_and_settle(&deleted.scene, &Edit::Add(top_book()), None).map_err(|e| e.to_string())?;
    let s = &added.summary;
    ensure(s.converged && s.metrics.R == 0.0, || {
        format!("add: converged {} R {}", s.converged, s.metrics.R)
    })?;
    let l = object_loss(&added.scene, "book-top")?;
    ensure(l == 0.0, || {
        format!("added book hangs over its support (L = {l:.2e})")
    })?;
    Ok(format!(
        "delete settles in {} frames, add in {} frames, R = 0, L = 0",
        deleted.summary.frames, added.summary.frames
    ))
}

// --------------------------------------------------------------- pipeline

pub struct SceneResult {
    pub name: &'static str,
    pub d: f64,
    pub r: f64,
    pub loss: f64,
    pub seconds: f64,
}

pub fn pipeline_result(name: &'static str, optimize: bool) -> Result<SceneResult, String> {
    let scene = acceptance_scene(name)
        .expect("known")
        .map_err(|e| e.to_string())?;
    let start = Instant::now();
    let out = run_pipeline(&scene, optimize, &OptimizerConfig::default(), None)
        .map_err(|e| format!("{name}: {e}"))?;
    Ok(SceneResult {
        name,
        d: out.summary.metrics.D,
        r: out.summary.metrics.R,
        loss: out.summary.final_loss.max(out.summary.loss),
        seconds: start.elapsed().as_secs_f64(),
    })
}

pub fn check_bundled_scenes() -> Check {
    let mut rows = Vec::new();
    for name in ACCEPTANCE_SCENES {
        let r = pipeline_result(name, true)?;
        ensure(r.d < 1e-3 && r.r == 0.0 && r.seconds <= 600.0, || {
            format!("{}: D {:.2e} R {} in {:.0} s", r.name, r.d, r.r, r.seconds)
        })?;
        rows.push(format!("{} D={:.1e} ({:.1}s)", r.name, r.d, r.seconds));
    }
    Ok(format!("R = 0 everywhere; {}", rows.join(", ")))
}

pub fn check_ablation() -> Check {
    let name = "off-center-block";
    let init = pipeline_result(name, false)?;
    ensure(init.d > 0.1, || {
        format!("init-only D = {:.3} is not unstable", init.d)
    })?;
    let ours = pipeline_result(name, true)?;
    ensure(ours.d < 1e-3 && ours.loss == 0.0, || {
        format!("optimized D = {:.2e}, L = {:.2e}", ours.d, ours.loss)
    })?;
    Ok(format!(
        "init-only D = {:.3}; optimized D = {:.1e}, L = 0",
        init.d, ours.d
    ))
}
