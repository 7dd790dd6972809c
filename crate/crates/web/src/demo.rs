use std::sync::Arc;

use layoutsim::edit::{apply_edit, Edit, NewObject};
use layoutsim::geometry::shapes::cuboid;
use layoutsim::geometry::Vec3;
use layoutsim::layout::{default_gap, refine_layout};
use layoutsim::metrics::MetricsReport;
use layoutsim::objective::{optimize_layout, total_loss, OptimizerConfig};
use layoutsim::scene::{ObjectSpec, Parent, RelationKind};
use layoutsim::scenes::acceptance_scene;
use layoutsim::sim::{simulate_to_equilibrium, SimulateOptions, System};
use layoutsim::state::{stack, unstack};
use layoutsim::{AffineState, Error, Result, Scene};
use serde::Serialize;

#[derive(Debug, Clone, Serialize)]
pub struct ObjectView {
    pub id: String,
    pub parent: String,
    /// Rest-pose vertices (m).
    pub vertices: Vec<[f64; 3]>,
    pub edges: Vec<[usize; 2]>,
}

#[derive(Debug, Clone, Serialize)]
#[allow(non_snake_case)]
pub struct RunSummary {
    pub label: String,
    pub frames: usize,
    pub converged: bool,
    pub D: f64,
    pub R: f64,
    /// Containment loss of the final state.
    pub loss: f64,
    /// Per-epoch loss, for optimization runs.
    pub losses: Vec<Option<f64>>,
}

/// A scene and the frames of the last run.
pub struct Demo {
    scene: Scene,
    frames: Vec<Vec<AffineState>>,
}

impl Demo {
    /// One of the bundled scenes, refined so it can be simulated.
    pub fn new(name: &str) -> Result<Self> {
        let scene =
            acceptance_scene(name).ok_or_else(|| Error::UnknownObject(name.to_string()))??;
        let refined = refine_layout(&scene, &scene.tree()?, default_gap(&scene))?;
        let scene = scene.with_states(&refined.states);
        let frames = vec![scene.states()];
        Ok(Self { scene, frames })
    }

    pub fn objects(&self) -> Result<Vec<ObjectView>> {
        let tree = self.scene.tree()?;
        let ids = self.scene.ids();
        Ok(self
            .scene
            .meshes
            .iter()
            .enumerate()
            .map(|(i, m)| ObjectView {
                id: ids[i].to_string(),
                parent: tree
                    .parent(i)
                    .map_or_else(|| "GROUND".to_string(), |p| ids[p].to_string()),
                vertices: m.vertices().iter().map(|v| [v.x, v.y, v.z]).collect(),
                edges: m.edges().to_vec(),
            })
            .collect())
    }

    pub fn frame_count(&self) -> usize {
        self.frames.len()
    }

    /// Frame `k` of the last run as 12 numbers per object: translation,
    /// then the linear map row-major.
    pub fn frame(&self, k: usize) -> Vec<f64> {
        self.frames
            .get(k.min(self.frames.len() - 1))
            .map(|f| f.iter().flat_map(AffineState::to_array).collect())
            .unwrap_or_default()
    }

    fn run(&mut self, scene: Scene, label: String, losses: Vec<Option<f64>>) -> Result<RunSummary> {
        let system = System::from_scene(&scene)?;
        let traj =
            simulate_to_equilibrium(&system, &stack(&scene.states()), SimulateOptions::default())?;
        let frames: Vec<Vec<AffineState>> = traj.states.iter().map(unstack).collect();
        let ids: Vec<String> = scene.ids().into_iter().map(String::from).collect();
        let metrics = MetricsReport::compute(&ids, &scene.meshes, &frames)?;
        let last = frames.last().expect("at least one frame");
        let (loss, _) = total_loss(
            &scene.meshes,
            &scene.tree()?,
            &scene.config.up(),
            &stack(last),
        );
        self.scene = scene.with_states(last);
        self.frames = frames;
        Ok(RunSummary {
            label,
            frames: traj.frames(),
            converged: traj.converged,
            D: metrics.D,
            R: metrics.R,
            loss,
            losses,
        })
    }

    /// Simulate from the current state to equilibrium.
    pub fn settle(&mut self) -> Result<RunSummary> {
        self.run(self.scene.clone(), "settle".into(), Vec::new())
    }

    pub fn delete(&mut self, id: &str) -> Result<RunSummary> {
        let edit = Edit::Delete(id.to_string());
        let scene = apply_edit(&self.scene, &edit)?;
        self.run(scene, edit.label(), Vec::new())
    }

    /// Add a box with half extents `half` (m) on `parent`, near `at`.
    pub fn add_box(
        &mut self,
        id: &str,
        parent: &str,
        half: [f64; 3],
        at: [f64; 3],
    ) -> Result<RunSummary> {
        let spec = ObjectSpec::new(
            id,
            format!("meshes/{id}.obj"),
            &AffineState::from_translation(at.into()),
        );
        let edit = Edit::Add(NewObject {
            spec,
            mesh: Arc::new(cuboid(Vec3::from(half))),
            parent: Parent::from(parent),
            kind: RelationKind::On,
        });
        let scene = apply_edit(&self.scene, &edit)?;
        self.run(scene, edit.label(), Vec::new())
    }

    /// Optimize the current layout, then simulate the result.
    pub fn optimize(&mut self, epochs: usize) -> Result<RunSummary> {
        let cfg = OptimizerConfig {
            max_epochs: epochs.max(1),
            ..Default::default()
        };
        let tree = self.scene.tree()?;
        let result = optimize_layout(&self.scene, &tree, &self.scene.states(), &cfg, None)?;
        let losses = result.history.iter().map(|r| r.loss).collect();
        let start = self.scene.with_states(&result.states);
        self.run(
            start,
            format!("optimize ({} epochs)", result.history.len()),
            losses,
        )
    }
}
