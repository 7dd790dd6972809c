//! Object addition and deletion on a settled scene, followed by
//! re-simulation to a new equilibrium.

use std::sync::atomic::AtomicBool;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::TriangleMesh;
use crate::layout::{default_gap, place_object};
use crate::metrics::MetricsReport;
use crate::scene::{ObjectSpec, Parent, Relation, RelationKind, Scene};
use crate::sim::{simulate_to_equilibrium, SimulateOptions, System, Trajectory};
use crate::state::{stack, unstack, AffineState};

/// A new object and where it goes in the scene tree.
#[derive(Debug, Clone)]
pub struct NewObject {
    pub spec: ObjectSpec,
    pub mesh: Arc<TriangleMesh>,
    pub parent: Parent,
    pub kind: RelationKind,
}

#[derive(Debug, Clone)]
pub enum Edit {
    Delete(String),
    Add(NewObject),
}

impl Edit {
    pub fn label(&self) -> String {
        match self {
            Edit::Delete(id) => format!("delete {id}"),
            Edit::Add(o) => format!("add {}", o.spec.id),
        }
    }
}

/// Apply `edit` to `scene` (whose object states are the current layout)
/// without simulating. The returned scene holds the edited starting layout.
pub fn apply_edit(scene: &Scene, edit: &Edit) -> Result<Scene> {
    let mut out = scene.clone();
    match edit {
        Edit::Delete(id) => out.remove_object(id)?,
        Edit::Add(o) => {
            let relation = Relation::new(o.spec.id.clone(), o.parent.clone(), o.kind);
            out.add_object(o.spec.clone(), o.mesh.clone(), Some(relation))?;
            let tree = out.tree()?;
            let i = out.len() - 1;
            let placed = place_object(&out, &tree, &out.states(), i, default_gap(&out))?;
            out.config.objects[i].set_state(&placed);
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EditSummary {
    pub edit: String,
    pub converged: bool,
    pub frames: usize,
    pub metrics: MetricsReport,
}

pub struct EditOutcome {
    /// Edited scene with its object states at the new equilibrium.
    pub scene: Scene,
    /// Layout the simulation started from.
    pub start: Vec<AffineState>,
    pub trajectory: Trajectory,
    pub summary: EditSummary,
}

/// Apply `edit` and simulate the result to equilibrium.
pub fn edit_and_settle(
    scene: &Scene,
    edit: &Edit,
    cancel: Option<&AtomicBool>,
) -> Result<EditOutcome> {
    let edited = apply_edit(scene, edit)?;
    if edited.is_empty() {
        return Err(Error::ZeroExtent);
    }
    settle(edited, edit.label(), cancel)
}

/// Simulate `scene` from its current object states to equilibrium.
pub fn settle(scene: Scene, label: String, cancel: Option<&AtomicBool>) -> Result<EditOutcome> {
    let system = System::from_scene(&scene)?;
    let start = scene.states();
    let opts = SimulateOptions {
        cancel,
        ..Default::default()
    };
    let trajectory = simulate_to_equilibrium(&system, &stack(&start), opts)?;
    let frames: Vec<Vec<AffineState>> = trajectory.states.iter().map(unstack).collect();
    let ids: Vec<String> = scene.ids().into_iter().map(String::from).collect();
    let metrics = MetricsReport::compute(&ids, &scene.meshes, &frames)?;
    let settled = scene.with_states(frames.last().expect("at least one frame"));
    Ok(EditOutcome {
        scene: settled,
        start,
        summary: EditSummary {
            edit: label,
            converged: trajectory.converged,
            frames: trajectory.frames(),
            metrics,
        },
        trajectory,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::shapes::cuboid;
    use crate::geometry::Vec3;
    use crate::scenes::three_book_stack;

    #[test]
    fn delete_unknown_is_error() {
        let s = three_book_stack().unwrap();
        assert!(matches!(
            apply_edit(&s, &Edit::Delete("nope".into())),
            Err(Error::UnknownObject(_))
        ));
    }

    #[test]
    fn delete_reparents_children() {
        let s = three_book_stack().unwrap();
        let e = apply_edit(&s, &Edit::Delete("book-large".into())).unwrap();
        let tree = e.tree().unwrap();
        let i = tree.index_of("book-medium").unwrap();
        assert_eq!(tree.parent(i), None);
    }

    #[test]
    fn added_object_is_clamped_and_lifted() {
        let s = three_book_stack().unwrap();
        let spec = ObjectSpec::new(
            "note",
            "meshes/note.obj",
            &AffineState::from_translation(Vec3::new(0.2, 0.0, 0.0)),
        );
        let add = Edit::Add(NewObject {
            spec,
            mesh: Arc::new(cuboid(Vec3::new(0.03, 0.002, 0.03))),
            parent: Parent::Object("book-small".into()),
            kind: RelationKind::On,
        });
        let e = apply_edit(&s, &add).unwrap();
        let boxes = e.aabbs(&e.states());
        let (note, small) = (&boxes[3], &boxes[2]);
        assert!(note.min.y > small.max.y);
        assert!(note.max.x <= small.max.x + 1e-12 && note.min.x >= small.min.x - 1e-12);
    }

    #[test]
    fn oversized_addition_is_rejected() {
        let s = three_book_stack().unwrap();
        let spec = ObjectSpec::new("rug", "meshes/rug.obj", &AffineState::identity());
        let add = Edit::Add(NewObject {
            spec,
            mesh: Arc::new(cuboid(Vec3::new(0.5, 0.002, 0.5))),
            parent: Parent::Object("book-small".into()),
            kind: RelationKind::On,
        });
        assert!(matches!(
            apply_edit(&s, &add),
            Err(Error::ChildExceedsParent { .. })
        ));
    }
}
