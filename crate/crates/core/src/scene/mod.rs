//! Scene description, scene files and the support tree.

mod tree;

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use nalgebra::Matrix3;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{obj, Aabb3, TriangleMesh, UpAxis, Vec3};
use crate::sim::SimParams;
use crate::state::AffineState;

pub use tree::{build_scene_tree, contact_warnings, SceneTree};

pub const SCENE_FORMAT: u32 = 1;
pub const GROUND: &str = "GROUND";

fn default_density() -> f64 {
    1000.0
}

fn identity_rows() -> [[f64; 3]; 3] {
    [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]]
}

fn default_gravity() -> [f64; 3] {
    [0.0, -9.8, 0.0]
}

fn default_format() -> u32 {
    SCENE_FORMAT
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ObjectSpec {
    pub id: String,
    /// Mesh file, relative to the scene file's directory.
    pub mesh: String,
    /// kg/m³
    #[serde(default = "default_density")]
    pub density: f64,
    /// Initial translation (m).
    #[serde(default)]
    pub translation: [f64; 3],
    /// Initial linear map, row-major; scale is folded in here.
    #[serde(default = "identity_rows")]
    pub linear: [[f64; 3]; 3],
}

impl ObjectSpec {
    pub fn new(id: impl Into<String>, mesh: impl Into<String>, state: &AffineState) -> Self {
        let mut spec = Self {
            id: id.into(),
            mesh: mesh.into(),
            density: default_density(),
            translation: [0.0; 3],
            linear: identity_rows(),
        };
        spec.set_state(state);
        spec
    }

    pub fn state(&self) -> AffineState {
        AffineState::new(
            Vec3::from(self.translation),
            Matrix3::from_fn(|i, j| self.linear[i][j]),
        )
    }

    pub fn set_state(&mut self, s: &AffineState) {
        self.translation = [s.p.x, s.p.y, s.p.z];
        self.linear = std::array::from_fn(|i| std::array::from_fn(|j| s.a[(i, j)]));
    }
}

/// Parent of a relation: either the ground or another object.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(from = "String", into = "String")]
pub enum Parent {
    Ground,
    Object(String),
}

impl From<String> for Parent {
    fn from(s: String) -> Self {
        if s == GROUND {
            Parent::Ground
        } else {
            Parent::Object(s)
        }
    }
}

impl From<Parent> for String {
    fn from(p: Parent) -> Self {
        p.to_string()
    }
}

impl From<&str> for Parent {
    fn from(s: &str) -> Self {
        Parent::from(s.to_string())
    }
}

impl fmt::Display for Parent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Parent::Ground => f.write_str(GROUND),
            Parent::Object(id) => f.write_str(id),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RelationKind {
    On,
    Contain,
    Support,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Relation {
    pub child: String,
    pub parent: Parent,
    pub kind: RelationKind,
}

impl Relation {
    pub fn new(child: impl Into<String>, parent: impl Into<Parent>, kind: RelationKind) -> Self {
        Self {
            child: child.into(),
            parent: parent.into(),
            kind,
        }
    }
}

/// Static half-space below `offset` along the up axis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GroundSpec {
    pub enabled: bool,
    /// Height of the ground plane (m).
    pub offset: f64,
}

impl Default for GroundSpec {
    fn default() -> Self {
        Self {
            enabled: true,
            offset: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SceneConfig {
    #[serde(default = "default_format")]
    pub format: u32,
    #[serde(default)]
    pub objects: Vec<ObjectSpec>,
    #[serde(default)]
    pub relations: Vec<Relation>,
    /// m/s²
    #[serde(default = "default_gravity")]
    pub gravity: [f64; 3],
    #[serde(default)]
    pub sim_params: SimParams,
    #[serde(default)]
    pub ground: GroundSpec,
}

impl Default for SceneConfig {
    fn default() -> Self {
        Self {
            format: SCENE_FORMAT,
            objects: Vec::new(),
            relations: Vec::new(),
            gravity: default_gravity(),
            sim_params: SimParams::default(),
            ground: GroundSpec::default(),
        }
    }
}

impl SceneConfig {
    pub fn gravity(&self) -> Vec3 {
        Vec3::from(self.gravity)
    }

    pub fn up(&self) -> UpAxis {
        UpAxis::from_gravity(&self.gravity())
    }

    pub fn ground_height(&self) -> Option<f64> {
        self.ground.enabled.then_some(self.ground.offset)
    }

    pub fn index_of(&self, id: &str) -> Option<usize> {
        self.objects.iter().position(|o| o.id == id)
    }

    pub fn states(&self) -> Vec<AffineState> {
        self.objects.iter().map(ObjectSpec::state).collect()
    }

    /// Check everything that does not need the file system.
    pub fn validate(&self) -> Result<()> {
        let bad = |message: String| Error::Parse {
            path: "scene".into(),
            message,
        };
        if self.format != SCENE_FORMAT {
            return Err(bad(format!(
                "unsupported format {}, expected {SCENE_FORMAT}",
                self.format
            )));
        }
        if self.gravity().norm() == 0.0 || !self.gravity().iter().all(|g| g.is_finite()) {
            return Err(bad("gravity must be a non-zero finite vector".into()));
        }
        self.sim_params.validate().map_err(bad)?;
        let mut seen = HashSet::new();
        for (k, o) in self.objects.iter().enumerate() {
            if o.id.is_empty() || o.id == GROUND {
                return Err(bad(format!(
                    "objects[{k}].id `{}` is reserved or empty",
                    o.id
                )));
            }
            if !seen.insert(o.id.as_str()) {
                return Err(Error::DuplicateObject(o.id.clone()));
            }
            if !(o.density > 0.0 && o.density.is_finite()) {
                return Err(bad(format!("objects[{k}].density must be positive")));
            }
            if !(o.state().a.determinant() > 0.0) {
                return Err(bad(format!(
                    "objects[{k}].linear must have positive determinant"
                )));
            }
        }
        for r in &self.relations {
            if !seen.contains(r.child.as_str()) {
                return Err(Error::UnknownObject(r.child.clone()));
            }
            if let Parent::Object(p) = &r.parent {
                if !seen.contains(p.as_str()) {
                    return Err(Error::UnknownObject(p.clone()));
                }
            }
        }
        Ok(())
    }

    /// Parse and validate a scene file. Mesh paths must exist.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| match e.kind() {
            std::io::ErrorKind::NotFound => Error::MissingAsset(path.to_path_buf()),
            _ => Error::Io(e),
        })?;
        let config = Self::from_json(&text).map_err(|e| match e {
            Error::Parse {
                path: field,
                message,
            } => Error::Parse {
                path: format!("{}: {field}", path.display()),
                message,
            },
            other => other,
        })?;
        let dir = scene_dir(path);
        for o in &config.objects {
            let mesh = dir.join(&o.mesh);
            if !mesh.is_file() {
                return Err(Error::MissingAsset(mesh));
            }
        }
        Ok(config)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let config: SceneConfig =
            serde_path_to_error::deserialize(de).map_err(|e| Error::Parse {
                path: e.path().to_string(),
                message: e.inner().to_string(),
            })?;
        config.validate()?;
        Ok(config)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("scene config serializes")
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json() + "\n")?;
        Ok(())
    }
}

fn scene_dir(path: &Path) -> PathBuf {
    path.parent().map(Path::to_path_buf).unwrap_or_default()
}

/// Per-object states keyed by object id.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Layout {
    pub states: BTreeMap<String, AffineState>,
}

impl Layout {
    pub fn from_config(config: &SceneConfig) -> Self {
        Self {
            states: config
                .objects
                .iter()
                .map(|o| (o.id.clone(), o.state()))
                .collect(),
        }
    }

    /// States in scene object order.
    pub fn ordered(&self, config: &SceneConfig) -> Result<Vec<AffineState>> {
        config
            .objects
            .iter()
            .map(|o| {
                self.states
                    .get(&o.id)
                    .copied()
                    .ok_or_else(|| Error::UnknownObject(o.id.clone()))
            })
            .collect()
    }

    pub fn from_ordered(config: &SceneConfig, states: &[AffineState]) -> Self {
        Self {
            states: config
                .objects
                .iter()
                .map(|o| o.id.clone())
                .zip(states.iter().copied())
                .collect(),
        }
    }

    /// Copy of `config` with its object transforms replaced by this layout.
    pub fn apply(&self, config: &SceneConfig) -> SceneConfig {
        let mut out = config.clone();
        for o in &mut out.objects {
            if let Some(s) = self.states.get(&o.id) {
                o.set_state(s);
            }
        }
        out
    }
}

/// A scene configuration together with its loaded meshes.
#[derive(Debug, Clone)]
pub struct Scene {
    pub config: SceneConfig,
    /// One mesh per object, in object order.
    pub meshes: Vec<Arc<TriangleMesh>>,
}

impl Scene {
    pub fn new(config: SceneConfig, meshes: Vec<Arc<TriangleMesh>>) -> Result<Self> {
        config.validate()?;
        if meshes.len() != config.objects.len() {
            return Err(Error::InvalidMesh(format!(
                "{} meshes for {} objects",
                meshes.len(),
                config.objects.len()
            )));
        }
        Ok(Self { config, meshes })
    }

    /// Load a scene file and every mesh it references.
    pub fn load(path: &Path) -> Result<Self> {
        let config = SceneConfig::load(path)?;
        let dir = scene_dir(path);
        let mut cache: HashMap<String, Arc<TriangleMesh>> = HashMap::new();
        let mut meshes = Vec::with_capacity(config.objects.len());
        for o in &config.objects {
            let mesh = match cache.get(&o.mesh) {
                Some(m) => m.clone(),
                None => {
                    let m = Arc::new(obj::read_obj(&dir.join(&o.mesh))?);
                    cache.insert(o.mesh.clone(), m.clone());
                    m
                }
            };
            meshes.push(mesh);
        }
        Self::new(config, meshes)
    }

    /// Write the scene file and its meshes (as OBJ, named by each object's
    /// `mesh` field) into the scene file's directory.
    pub fn save(&self, path: &Path) -> Result<()> {
        let dir = scene_dir(path);
        if !dir.as_os_str().is_empty() {
            std::fs::create_dir_all(&dir)?;
        }
        let mut written = HashSet::new();
        for (o, m) in self.config.objects.iter().zip(&self.meshes) {
            if written.insert(o.mesh.clone()) {
                let target = dir.join(&o.mesh);
                if let Some(parent) = target.parent() {
                    std::fs::create_dir_all(parent)?;
                }
                obj::write_obj(m, &target)?;
            }
        }
        self.config.save(path)
    }

    pub fn len(&self) -> usize {
        self.config.objects.len()
    }

    pub fn is_empty(&self) -> bool {
        self.config.objects.is_empty()
    }

    pub fn ids(&self) -> Vec<&str> {
        self.config.objects.iter().map(|o| o.id.as_str()).collect()
    }

    pub fn states(&self) -> Vec<AffineState> {
        self.config.states()
    }

    pub fn with_states(&self, states: &[AffineState]) -> Scene {
        let mut out = self.clone();
        for (o, s) in out.config.objects.iter_mut().zip(states) {
            o.set_state(s);
        }
        out
    }

    pub fn tree(&self) -> Result<SceneTree> {
        build_scene_tree(&self.config.objects, &self.config.relations)
    }

    /// World boxes of every object under `states`.
    pub fn aabbs(&self, states: &[AffineState]) -> Vec<Aabb3> {
        self.meshes
            .iter()
            .zip(states)
            .map(|(m, s)| {
                Aabb3::from_points(m.vertices().iter().map(|v| s.apply(v))).expect("non-empty mesh")
            })
            .collect()
    }

    /// Mean over meshes of the longest side of the box of the mesh under its
    /// initial linear map.
    pub fn mean_mesh_size(&self) -> f64 {
        let states: Vec<AffineState> = self
            .states()
            .iter()
            .map(|s| AffineState::new(Vec3::zeros(), s.a))
            .collect();
        crate::metrics::mean_mesh_size_posed(&self.meshes, &states)
    }

    pub fn resolved_params(&self) -> crate::sim::ResolvedParams {
        self.config.sim_params.resolve(
            self.config.gravity(),
            self.config.ground_height(),
            self.mean_mesh_size(),
        )
    }

    /// Remove an object. Relations naming it as parent are re-pointed to its
    /// own parent so its dependents stay in the tree.
    pub fn remove_object(&mut self, id: &str) -> Result<()> {
        let k = self
            .config
            .index_of(id)
            .ok_or_else(|| Error::UnknownObject(id.to_string()))?;
        let parent = self
            .config
            .relations
            .iter()
            .find(|r| r.child == id)
            .map(|r| r.parent.clone())
            .unwrap_or(Parent::Ground);
        self.config.objects.remove(k);
        self.meshes.remove(k);
        self.config.relations.retain(|r| r.child != id);
        for r in &mut self.config.relations {
            if r.parent == Parent::Object(id.to_string()) {
                r.parent = parent.clone();
            }
        }
        Ok(())
    }

    pub fn add_object(
        &mut self,
        spec: ObjectSpec,
        mesh: Arc<TriangleMesh>,
        relation: Option<Relation>,
    ) -> Result<()> {
        if self.config.index_of(&spec.id).is_some() {
            return Err(Error::DuplicateObject(spec.id));
        }
        let mut config = self.config.clone();
        if let Some(r) = &relation {
            if r.child != spec.id {
                return Err(Error::UnknownObject(r.child.clone()));
            }
        }
        config.objects.push(spec);
        config.relations.extend(relation);
        config.validate()?;
        build_scene_tree(&config.objects, &config.relations)?;
        self.config = config;
        self.meshes.push(mesh);
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_file_gets_defaults() {
        let c = SceneConfig::from_json(r#"{"objects":[{"id":"cup","mesh":"cup.obj"}]}"#).unwrap();
        assert_eq!(c.objects[0].density, 1000.0);
        assert_eq!(c.gravity, [0.0, -9.8, 0.0]);
        assert_eq!(c.objects[0].state(), AffineState::identity());
        assert_eq!(c.sim_params, SimParams::default());
        assert!(c.ground.enabled);
    }

    #[test]
    fn parse_errors_name_the_field() {
        let err =
            SceneConfig::from_json(r#"{"objects":[{"id":"a","mesh":"a.obj","density":"heavy"}]}"#)
                .unwrap_err();
        match err {
            Error::Parse { path, .. } => assert_eq!(path, "objects[0].density"),
            other => panic!("{other:?}"),
        }
        let err = SceneConfig::from_json(r#"{"objects":[],"sim_params":{"dt":-1}}"#).unwrap_err();
        assert!(matches!(err, Error::Parse { .. }));
    }

    #[test]
    fn relations_must_resolve() {
        let err = SceneConfig::from_json(
            r#"{"objects":[{"id":"a","mesh":"a.obj"}],"relations":[{"child":"a","parent":"b","kind":"on"}]}"#,
        )
        .unwrap_err();
        assert!(matches!(err, Error::UnknownObject(id) if id == "b"));
    }

    #[test]
    fn ground_parent_round_trips_as_string() {
        let r = Relation::new("a", GROUND, RelationKind::On);
        let s = serde_json::to_string(&r).unwrap();
        assert_eq!(s, r#"{"child":"a","parent":"GROUND","kind":"on"}"#);
        assert_eq!(serde_json::from_str::<Relation>(&s).unwrap(), r);
    }
}
