//! Semantic containment loss and the simulation-in-the-loop layout optimizer.

use web_time::Instant;

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::diffsim::backprop;
use crate::error::{Error, Result};
use crate::geometry::{project_horizontal, Aabb3, Rect2, TriangleMesh, UpAxis, Vec2};
use crate::layout::repair_layout;
use crate::scene::{Scene, SceneTree};
use crate::sim::{simulate_to_equilibrium, SimulateOptions, System, Trajectory};
use crate::state::{stack, unstack, AffineState};

/// Distance from `p` to `r` (zero inside) and its gradient in `p`.
pub fn box_distance_grad(p: &Vec2, r: &Rect2) -> (f64, Vec2) {
    let excess = Vec2::new(excess(p.x, r.min.x, r.max.x), excess(p.y, r.min.y, r.max.y));
    let d = excess.norm();
    if d == 0.0 {
        (0.0, Vec2::zeros())
    } else {
        (d, excess / d)
    }
}

fn excess(x: f64, lo: f64, hi: f64) -> f64 {
    if x < lo {
        x - lo
    } else if x > hi {
        x - hi
    } else {
        0.0
    }
}

pub fn box_distance(p: &Vec2, r: &Rect2) -> f64 {
    box_distance_grad(p, r).0
}

/// Gradients of [`local_loss`] in the min and max corners of both rectangles.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CornerGrad {
    pub object_min: Vec2,
    pub object_max: Vec2,
    pub container_min: Vec2,
    pub container_max: Vec2,
}

/// Signed overshoot below `lo` and above `hi`.
fn overshoot(x: f64, lo: f64, hi: f64) -> (f64, f64) {
    ((x - lo).min(0.0), (x - hi).max(0.0))
}

/// Squared corner distances of `object` to `container` and their gradients.
pub fn local_loss_grad(object: &Rect2, container: &Rect2) -> (f64, CornerGrad) {
    let mut loss = 0.0;
    let mut g = CornerGrad {
        object_min: Vec2::zeros(),
        object_max: Vec2::zeros(),
        container_min: Vec2::zeros(),
        container_max: Vec2::zeros(),
    };
    for axis in 0..2 {
        let (lo, hi) = (container.min[axis], container.max[axis]);
        for (x, is_min) in [(object.min[axis], true), (object.max[axis], false)] {
            let (below, above) = overshoot(x, lo, hi);
            let e = below + above;
            loss += e * e;
            let slot = if is_min {
                &mut g.object_min
            } else {
                &mut g.object_max
            };
            slot[axis] += 2.0 * e;
            g.container_min[axis] -= 2.0 * below;
            g.container_max[axis] -= 2.0 * above;
        }
    }
    (loss, g)
}

pub fn local_loss(object: &Rect2, container: &Rect2) -> f64 {
    local_loss_grad(object, container).0
}

/// Chain gradients in a body's horizontal AABB corners to its 12 coordinates
/// through the extreme vertices.
fn chain_rect_grad(
    mesh: &TriangleMesh,
    state: &AffineState,
    world: [usize; 2],
    g_min: &Vec2,
    g_max: &Vec2,
    out: &mut DVector<f64>,
    offset: usize,
) {
    let verts = mesh.vertices();
    for (axis, w) in world.into_iter().enumerate() {
        if g_min[axis] == 0.0 && g_max[axis] == 0.0 {
            continue;
        }
        let mut lo = (f64::INFINITY, 0);
        let mut hi = (f64::NEG_INFINITY, 0);
        for (k, v) in verts.iter().enumerate() {
            let x = state.apply(v)[w];
            if x < lo.0 {
                lo = (x, k);
            }
            if x > hi.0 {
                hi = (x, k);
            }
        }
        for (g, k) in [(g_min[axis], lo.1), (g_max[axis], hi.1)] {
            if g == 0.0 {
                continue;
            }
            let v = verts[k];
            out[offset + w] += g;
            for j in 0..3 {
                out[offset + 3 + 3 * w + j] += g * v[j];
            }
        }
    }
}

/// Summed containment loss over every object whose tree parent is another
/// object, and its gradient in `q`.
pub fn total_loss(
    meshes: &[std::sync::Arc<TriangleMesh>],
    tree: &SceneTree,
    up: &UpAxis,
    q: &DVector<f64>,
) -> (f64, DVector<f64>) {
    let states = unstack(q);
    let mut grad = DVector::zeros(q.len());
    let mut total = 0.0;
    let world = up.horizontal();
    let boxes: Vec<Aabb3> = meshes
        .iter()
        .zip(&states)
        .map(|(m, s)| {
            Aabb3::from_points(m.vertices().iter().map(|v| s.apply(v))).expect("non-empty mesh")
        })
        .collect();
    for i in 0..tree.len() {
        let Some(p) = tree.parent(i) else { continue };
        let container = project_horizontal(&boxes[p], up);
        let object = project_horizontal(&boxes[i], up);
        let (l, g) = local_loss_grad(&object, &container);
        if l == 0.0 {
            continue;
        }
        total += l;
        chain_rect_grad(
            &meshes[i],
            &states[i],
            world,
            &g.object_min,
            &g.object_max,
            &mut grad,
            12 * i,
        );
        chain_rect_grad(
            &meshes[p],
            &states[p],
            world,
            &g.container_min,
            &g.container_max,
            &mut grad,
            12 * p,
        );
    }
    (total, grad)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LossMode {
    /// Sum over every `loss_frame_interval`-th frame and the last one.
    Accumulated,
    /// Last frame only.
    FinalOnly,
}

/// Which coordinates of each body the optimizer may change.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DofMask {
    Translation,
    All,
}

impl DofMask {
    pub fn allows(&self, coord: usize) -> bool {
        match self {
            DofMask::Translation => coord % 12 < 3,
            DofMask::All => true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OptimizerConfig {
    pub learning_rate: f64,
    pub max_epochs: usize,
    pub loss_frame_interval: usize,
    pub mask: DofMask,
    pub loss_mode: LossMode,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        Self {
            learning_rate: 1e-3,
            max_epochs: 50,
            loss_frame_interval: 10,
            mask: DofMask::Translation,
            loss_mode: LossMode::Accumulated,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

impl OptimizerConfig {
    pub fn validate(&self) -> std::result::Result<(), String> {
        if !(self.learning_rate > 0.0) {
            return Err("learning_rate must be positive".into());
        }
        if self.max_epochs == 0 || self.loss_frame_interval == 0 {
            return Err("max_epochs and loss_frame_interval must be positive".into());
        }
        if !(0.0..1.0).contains(&self.beta1)
            || !(0.0..1.0).contains(&self.beta2)
            || !(self.epsilon > 0.0)
        {
            return Err("invalid ADAM constants".into());
        }
        Ok(())
    }

    /// Frames at which the loss is evaluated for a trajectory of `frames` states.
    pub fn loss_frames(&self, frames: usize) -> Vec<usize> {
        let last = frames - 1;
        let mut out = match self.loss_mode {
            LossMode::FinalOnly => Vec::new(),
            LossMode::Accumulated => (1..last)
                .filter(|t| t % self.loss_frame_interval == 0)
                .collect(),
        };
        out.push(last);
        out
    }
}

/// Accumulated loss over a trajectory with per-frame cotangents.
pub fn trajectory_loss(
    meshes: &[std::sync::Arc<TriangleMesh>],
    tree: &SceneTree,
    up: &UpAxis,
    traj: &Trajectory,
    cfg: &OptimizerConfig,
) -> (f64, Vec<(usize, DVector<f64>)>) {
    let mut total = 0.0;
    let mut cot = Vec::new();
    for t in cfg.loss_frames(traj.frames()) {
        let (l, g) = total_loss(meshes, tree, up, &traj.states[t]);
        total += l;
        if l > 0.0 {
            cot.push((t, g));
        }
    }
    (total, cot)
}

/// Value and gradient of the accumulated loss with respect to `q0`.
pub fn loss_and_gradient(
    scene: &Scene,
    tree: &SceneTree,
    system: &System,
    q0: &DVector<f64>,
    cfg: &OptimizerConfig,
    max_frames: Option<usize>,
) -> Result<(f64, DVector<f64>, Trajectory)> {
    let opts = SimulateOptions {
        max_frames,
        ..Default::default()
    };
    let traj = simulate_to_equilibrium(system, q0, opts)?;
    let (loss, cot) = trajectory_loss(&scene.meshes, tree, &scene.config.up(), &traj, cfg);
    let grad = if cot.is_empty() {
        DVector::zeros(q0.len())
    } else {
        backprop(system, &traj, &cot)?
    };
    Ok((loss, grad, traj))
}

/// First and second moment state of ADAM.
#[derive(Debug, Clone)]
pub struct Adam {
    m: DVector<f64>,
    v: DVector<f64>,
    t: i32,
}

impl Adam {
    pub fn new(n: usize) -> Self {
        Self {
            m: DVector::zeros(n),
            v: DVector::zeros(n),
            t: 0,
        }
    }

    pub fn step(&mut self, g: &DVector<f64>, cfg: &OptimizerConfig) -> DVector<f64> {
        self.t += 1;
        self.m = &self.m * cfg.beta1 + g * (1.0 - cfg.beta1);
        self.v = &self.v * cfg.beta2 + g.component_mul(g) * (1.0 - cfg.beta2);
        let mc = 1.0 - cfg.beta1.powi(self.t);
        let vc = 1.0 - cfg.beta2.powi(self.t);
        DVector::from_fn(g.len(), |i, _| {
            -cfg.learning_rate * (self.m[i] / mc) / ((self.v[i] / vc).sqrt() + cfg.epsilon)
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub loss: Option<f64>,
    pub grad_norm: Option<f64>,
    pub wall_ms: f64,
    pub frames: usize,
    pub converged: bool,
    pub error: Option<String>,
}

#[derive(Debug, Clone)]
pub struct OptimizationResult {
    /// Best initial layout found, in object order.
    pub states: Vec<AffineState>,
    pub best_loss: f64,
    pub best_epoch: usize,
    /// Equilibrium reached from the best layout.
    pub equilibrium: Vec<AffineState>,
    pub converged: bool,
    pub history: Vec<EpochRecord>,
}

/// Gradient descent on the initial layout with ADAM. Returns the iterate
/// with the lowest loss; stops as soon as the loss reaches zero.
pub fn optimize_layout(
    scene: &Scene,
    tree: &SceneTree,
    q0: &[AffineState],
    cfg: &OptimizerConfig,
    mut on_epoch: Option<&mut dyn FnMut(&EpochRecord)>,
) -> Result<OptimizationResult> {
    cfg.validate().map_err(|m| Error::OptimizationFailed(m))?;
    let system = System::from_scene(&scene.with_states(q0))?;
    let gap = crate::layout::default_gap(scene);
    let mut q = stack(q0);
    let mut adam = Adam::new(q.len());
    let mut history = Vec::new();
    let mut best: Option<(f64, usize, DVector<f64>, Trajectory)> = None;
    let mut last_good: Option<DVector<f64>> = None;
    for epoch in 0..cfg.max_epochs {
        let start = Instant::now();
        let outcome = loss_and_gradient(scene, tree, &system, &q, cfg, None);
        let mut record = EpochRecord {
            epoch,
            loss: None,
            grad_norm: None,
            wall_ms: 0.0,
            frames: 0,
            converged: false,
            error: None,
        };
        match outcome {
            Ok((loss, mut grad, traj)) => {
                for i in 0..grad.len() {
                    if !cfg.mask.allows(i) {
                        grad[i] = 0.0;
                    }
                }
                record.loss = Some(loss);
                record.grad_norm = Some(grad.amax());
                record.frames = traj.frames();
                record.converged = traj.converged;
                record.wall_ms = start.elapsed().as_secs_f64() * 1e3;
                log::info!("epoch {epoch}: loss {loss:.6e}, |grad| {:.3e}", grad.amax());
                if best.as_ref().is_none_or(|b| loss < b.0) {
                    best = Some((loss, epoch, q.clone(), traj));
                }
                if let Some(cb) = on_epoch.as_mut() {
                    cb(&record);
                }
                history.push(record);
                if loss == 0.0 {
                    break;
                }
                last_good = Some(q.clone());
                let mut next = &q + adam.step(&grad, cfg);
                if next == q {
                    break;
                }
                let repaired = repair_layout(scene, tree, &unstack(&next), gap);
                next = stack(&repaired);
                q = next;
            }
            Err(e) => {
                log::warn!("epoch {epoch} failed: {e}");
                record.error = Some(e.category().to_string());
                record.wall_ms = start.elapsed().as_secs_f64() * 1e3;
                if let Some(cb) = on_epoch.as_mut() {
                    cb(&record);
                }
                history.push(record);
                match &last_good {
                    // retreat halfway towards the last iterate that simulated
                    Some(prev) => q = prev + (&q - prev) * 0.5,
                    None => break,
                }
            }
        }
    }
    let Some((best_loss, best_epoch, best_q, traj)) = best else {
        return Err(Error::OptimizationFailed(format!(
            "{} epochs attempted",
            history.len()
        )));
    };
    Ok(OptimizationResult {
        states: unstack(&best_q),
        best_loss,
        best_epoch,
        equilibrium: unstack(traj.last()),
        converged: traj.converged,
        history,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn square(c: f64, h: f64) -> Rect2 {
        Rect2::from_center(Vec2::new(c, c), Vec2::repeat(h))
    }

    #[test]
    fn box_distance_cases() {
        let b = square(0.0, 1.0);
        assert_eq!(box_distance(&Vec2::new(0.3, -0.2), &b), 0.0);
        assert!((box_distance(&Vec2::new(2.0, 0.0), &b) - 1.0).abs() < 1e-15);
        assert!((box_distance(&Vec2::new(2.0, 3.0), &b) - 5f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn local_loss_cases() {
        let c = square(0.0, 1.0);
        assert_eq!(local_loss(&square(0.0, 0.5), &c), 0.0);
        let r = Rect2::new(Vec2::new(0.0, 0.0), Vec2::new(1.5, 0.5));
        assert!((local_loss(&r, &c) - 0.25).abs() < 1e-15);
        let r = Rect2::new(Vec2::new(2.0, 0.0), Vec2::new(2.0, 0.5));
        assert!((local_loss(&r, &c) - 2.0).abs() < 1e-15);
    }

    #[test]
    fn local_loss_gradient_matches_differences() {
        let o = Rect2::new(Vec2::new(0.4, -1.3), Vec2::new(1.7, 0.2));
        let c = square(0.0, 1.0);
        let (_, g) = local_loss_grad(&o, &c);
        let h = 1e-6;
        let fd = |f: &dyn Fn(f64) -> f64| (f(h) - f(-h)) / (2.0 * h);
        for axis in 0..2 {
            let shift = |r: &Rect2, d: f64, lo: bool| {
                let mut r = *r;
                if lo {
                    r.min[axis] += d;
                } else {
                    r.max[axis] += d;
                }
                r
            };
            let cases = [
                (
                    g.object_min[axis],
                    fd(&|d| local_loss(&shift(&o, d, true), &c)),
                ),
                (
                    g.object_max[axis],
                    fd(&|d| local_loss(&shift(&o, d, false), &c)),
                ),
                (
                    g.container_min[axis],
                    fd(&|d| local_loss(&o, &shift(&c, d, true))),
                ),
                (
                    g.container_max[axis],
                    fd(&|d| local_loss(&o, &shift(&c, d, false))),
                ),
            ];
            for (a, b) in cases {
                assert!((a - b).abs() < 1e-6, "{a} vs {b}");
            }
        }
    }

    #[test]
    fn adam_zero_gradient_is_still() {
        let mut a = Adam::new(4);
        let d = a.step(&DVector::zeros(4), &OptimizerConfig::default());
        assert_eq!(d.amax(), 0.0);
    }

    #[test]
    fn loss_frames_include_last() {
        let cfg = OptimizerConfig::default();
        assert_eq!(cfg.loss_frames(25), vec![10, 20, 24]);
        assert_eq!(cfg.loss_frames(21), vec![10, 20]);
        let fin = OptimizerConfig {
            loss_mode: LossMode::FinalOnly,
            ..cfg
        };
        assert_eq!(fin.loss_frames(25), vec![24]);
    }
}
