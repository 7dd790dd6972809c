//! The whole layout pipeline: refine the coarse layout, optimize it through
//! simulation, settle it, and score the delivered layout.

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::layout::{default_gap, refine_layout, RefinedLayout};
use crate::metrics::MetricsReport;
use crate::objective::{
    optimize_layout, total_loss, EpochRecord, OptimizationResult, OptimizerConfig,
};
use crate::scene::Scene;
use crate::sim::{simulate_to_equilibrium, SimulateOptions, System, Trajectory};
use crate::state::{stack, unstack, AffineState};

/// Simulate `states` to equilibrium and measure D over that run and R on its
/// last frame. A layout that is already stable scores D ≈ 0.
pub fn evaluate_layout(
    scene: &Scene,
    states: &[AffineState],
) -> Result<(MetricsReport, Trajectory)> {
    let scene = scene.with_states(states);
    let system = System::from_scene(&scene)?;
    let traj = simulate_to_equilibrium(&system, &stack(states), SimulateOptions::default())?;
    let frames: Vec<Vec<AffineState>> = traj.states.iter().map(unstack).collect();
    let ids: Vec<String> = scene.ids().into_iter().map(String::from).collect();
    Ok((MetricsReport::compute(&ids, &scene.meshes, &frames)?, traj))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineSummary {
    pub optimized: bool,
    /// Semantic loss of the chosen layout's simulation (0 when skipped).
    pub loss: f64,
    pub epochs: usize,
    /// Whether the settling run converged.
    pub converged: bool,
    /// Semantic loss on the delivered layout alone.
    pub final_loss: f64,
    /// Metrics of the delivered layout.
    pub metrics: MetricsReport,
}

pub struct PipelineOutcome {
    pub refined: RefinedLayout,
    pub optimization: Option<OptimizationResult>,
    /// Delivered layout, in object order.
    pub layout: Vec<AffineState>,
    pub summary: PipelineSummary,
}

/// Refine, then either deliver the refined layout as is (`optimize` false)
/// or optimize it and deliver the equilibrium it settles to.
pub fn run_pipeline(
    scene: &Scene,
    optimize: bool,
    cfg: &OptimizerConfig,
    on_epoch: Option<&mut dyn FnMut(&EpochRecord)>,
) -> Result<PipelineOutcome> {
    let tree = scene.tree()?;
    let refined = refine_layout(scene, &tree, default_gap(scene))?;
    let (optimization, layout, loss, converged) = if optimize {
        let start = scene.with_states(&refined.states);
        let result = optimize_layout(&start, &tree, &refined.states, cfg, on_epoch)?;
        let layout = result.equilibrium.clone();
        let (loss, converged) = (result.best_loss, result.converged);
        (Some(result), layout, loss, converged)
    } else {
        (None, refined.states.clone(), 0.0, true)
    };
    let (metrics, _) = evaluate_layout(scene, &layout)?;
    let (final_loss, _) = total_loss(&scene.meshes, &tree, &scene.config.up(), &stack(&layout));
    let summary = PipelineSummary {
        optimized: optimize,
        loss,
        epochs: optimization.as_ref().map_or(0, |o| o.history.len()),
        converged,
        final_loss,
        metrics,
    };
    Ok(PipelineOutcome {
        refined,
        optimization,
        layout,
        summary,
    })
}
