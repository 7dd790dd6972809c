//! Built-in scenes: the acceptance set and seeded random scene trees.

use std::path::Path;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::Result;
use crate::geometry::shapes::{cuboid, cylinder, open_box, trapezoid_prism};
use crate::geometry::{TriangleMesh, Vec3};
use crate::scene::{ObjectSpec, Relation, RelationKind, Scene, SceneConfig, GROUND};
use crate::state::AffineState;

pub const ACCEPTANCE_SCENES: [&str; 6] = [
    "cube-on-ground",
    "two-cube-stack",
    "three-book-stack",
    "pen-holder",
    "fruit-bowl",
    "off-center-block",
];

/// Incrementally assembled scene.
#[derive(Default)]
pub struct SceneBuilder {
    config: SceneConfig,
    meshes: Vec<Arc<TriangleMesh>>,
}

impl SceneBuilder {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn object(mut self, id: &str, mesh: TriangleMesh, at: [f64; 3]) -> Self {
        let state = AffineState::from_translation(Vec3::from(at));
        self.config
            .objects
            .push(ObjectSpec::new(id, format!("meshes/{id}.obj"), &state));
        self.meshes.push(Arc::new(mesh));
        self
    }

    pub fn density(mut self, density: f64) -> Self {
        if let Some(o) = self.config.objects.last_mut() {
            o.density = density;
        }
        self
    }

    pub fn on(self, child: &str, parent: &str) -> Self {
        self.relation(child, parent, RelationKind::On)
    }

    pub fn inside(self, child: &str, parent: &str) -> Self {
        self.relation(child, parent, RelationKind::Contain)
    }

    pub fn relation(mut self, child: &str, parent: &str, kind: RelationKind) -> Self {
        self.config
            .relations
            .push(Relation::new(child, parent, kind));
        self
    }

    pub fn configure(mut self, f: impl FnOnce(&mut SceneConfig)) -> Self {
        f(&mut self.config);
        self
    }

    pub fn build(self) -> Result<Scene> {
        Scene::new(self.config, self.meshes)
    }
}

fn block(hx: f64, hy: f64, hz: f64) -> TriangleMesh {
    cuboid(Vec3::new(hx, hy, hz))
}

/// A 5 cm cube placed partly below the ground.
pub fn cube_on_ground() -> Result<Scene> {
    SceneBuilder::new()
        .object("cube", block(0.025, 0.025, 0.025), [0.0, 0.02, 0.0])
        .on("cube", GROUND)
        .build()
}

/// A 4 cm cube overlapping the top of a 6 cm cube.
pub fn two_cube_stack() -> Result<Scene> {
    SceneBuilder::new()
        .object("base", block(0.03, 0.03, 0.03), [0.0, 0.028, 0.0])
        .on("base", GROUND)
        .object("top", block(0.02, 0.02, 0.02), [0.006, 0.07, -0.004])
        .on("top", "base")
        .build()
}

/// Three books of decreasing size, interpenetrating in the coarse layout.
pub fn three_book_stack() -> Result<Scene> {
    SceneBuilder::new()
        .object("book-large", block(0.12, 0.02, 0.085), [0.0, 0.019, 0.0])
        .density(600.0)
        .on("book-large", GROUND)
        .object(
            "book-medium",
            block(0.105, 0.0175, 0.075),
            [0.01, 0.045, 0.008],
        )
        .density(600.0)
        .on("book-medium", "book-large")
        .object(
            "book-small",
            block(0.09, 0.015, 0.065),
            [-0.012, 0.07, -0.006],
        )
        .density(600.0)
        .on("book-small", "book-medium")
        .build()
}

/// An open holder with two upright pens, one poking through the wall.
pub fn pen_holder() -> Result<Scene> {
    SceneBuilder::new()
        .object(
            "holder",
            open_box(0.04, 0.04, 0.1, 0.005, 0.005),
            [0.0, 0.0, 0.0],
        )
        .density(800.0)
        .on("holder", GROUND)
        .object("pen-blue", block(0.005, 0.04, 0.005), [-0.015, 0.05, 0.01])
        .inside("pen-blue", "holder")
        .object("pen-red", block(0.005, 0.04, 0.005), [0.038, 0.06, -0.01])
        .inside("pen-red", "holder")
        .build()
}

/// A shallow tray holding three small fruit-like prisms.
pub fn fruit_bowl() -> Result<Scene> {
    let fruit = || cylinder(0.02, 0.03, 8);
    SceneBuilder::new()
        .object(
            "tray",
            open_box(0.12, 0.08, 0.03, 0.006, 0.006),
            [0.0, 0.0, 0.0],
        )
        .density(800.0)
        .on("tray", GROUND)
        .object("apple", fruit(), [-0.06, 0.01, 0.0])
        .inside("apple", "tray")
        .object("orange", fruit(), [-0.04, 0.012, 0.01])
        .inside("orange", "tray")
        .object("pear", fruit(), [0.07, 0.008, -0.02])
        .inside("pear", "tray")
        .build()
}

/// A 3 cm block resting mostly beyond the flat top of a tall sloped pedestal.
pub fn off_center_block() -> Result<Scene> {
    SceneBuilder::new()
        .object(
            "pedestal",
            trapezoid_prism(0.1, 0.04, 0.08, 0.06),
            [0.0, 0.0, 0.0],
        )
        .on("pedestal", GROUND)
        .object(
            "block",
            block(0.015, 0.015, 0.015).subdivided().subdivided(),
            [0.025, 0.096, 0.0],
        )
        .on("block", "pedestal")
        .build()
}

pub fn acceptance_scene(name: &str) -> Option<Result<Scene>> {
    Some(match name {
        "cube-on-ground" => cube_on_ground(),
        "two-cube-stack" => two_cube_stack(),
        "three-book-stack" => three_book_stack(),
        "pen-holder" => pen_holder(),
        "fruit-bowl" => fruit_bowl(),
        "off-center-block" => off_center_block(),
        _ => return None,
    })
}

/// Four boxes in a random tree with random coarse offsets. Children are
/// smaller than their parent so containment is always feasible.
pub fn random_tree_scene(seed: u64) -> Result<Scene> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut b = SceneBuilder::new();
    let mut half: Vec<Vec3> = Vec::new();
    let mut center: Vec<Vec3> = Vec::new();
    let mut kids: Vec<usize> = Vec::new();
    for i in 0..4 {
        let parent = rng.random_range(0..=i);
        let id = format!("obj{i}");
        let (h, c) = if parent == i {
            let h = Vec3::new(
                rng.random_range(0.03..0.1),
                rng.random_range(0.01..0.05),
                rng.random_range(0.03..0.1),
            );
            let c = Vec3::new(
                rng.random_range(-0.1..0.1),
                rng.random_range(-0.02..0.08),
                rng.random_range(-0.1..0.1),
            );
            (h, c)
        } else {
            let ph = half[parent];
            let pc = center[parent];
            let f = 0.5 / (1.0 + kids[parent] as f64).sqrt();
            let h = Vec3::new(
                ph.x * rng.random_range(0.2..f.max(0.25)),
                rng.random_range(0.01..0.04),
                ph.z * rng.random_range(0.2..f.max(0.25)),
            );
            let c = pc
                + Vec3::new(
                    rng.random_range(-1.2..1.2) * ph.x,
                    rng.random_range(-0.5..1.5) * ph.y,
                    rng.random_range(-1.2..1.2) * ph.z,
                );
            (h, c)
        };
        b = b.object(&id, block(h.x, h.y, h.z), [c.x, c.y, c.z]);
        b = if parent == i {
            b.on(&id, GROUND)
        } else {
            let kind = if rng.random_bool(0.5) {
                RelationKind::On
            } else {
                RelationKind::Support
            };
            kids[parent] += 1;
            b.relation(&id, &format!("obj{parent}"), kind)
        };
        half.push(h);
        center.push(c);
        kids.push(0);
    }
    b.build()
}

/// Write every acceptance scene to `dir/<name>/scene.json`.
pub fn export_acceptance_scenes(dir: &Path) -> Result<Vec<std::path::PathBuf>> {
    let mut out = Vec::new();
    for name in ACCEPTANCE_SCENES {
        let scene = acceptance_scene(name).expect("known scene")?;
        let path = dir.join(name).join("scene.json");
        scene.save(&path)?;
        out.push(path);
    }
    Ok(out)
}
