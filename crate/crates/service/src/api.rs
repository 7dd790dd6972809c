//! Request and response bodies. Every JSON document carries `api_version`.

use std::collections::BTreeMap;

use layoutsim::scene::{RelationKind, SceneConfig};
use layoutsim::sim::FrameRecord;
use serde::{Deserialize, Serialize};

pub const API_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneView {
    pub api_version: u32,
    pub revision: u64,
    pub simulating: bool,
    /// Scene with object transforms at the current state.
    pub scene: SceneConfig,
    /// Object id to the content hash of its mesh, fetchable from `/assets/{hash}`.
    pub mesh_hashes: BTreeMap<String, String>,
}

fn on() -> RelationKind {
    RelationKind::On
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AddObjectRequest {
    pub id: String,
    /// OBJ file name in the asset directory.
    pub asset: String,
    /// Parent object id; the ground when absent.
    #[serde(default)]
    pub parent: Option<String>,
    #[serde(default = "on")]
    pub kind: RelationKind,
    /// Coarse placement (m). Clamped into the parent and lifted above it.
    #[serde(default)]
    pub translation: [f64; 3],
    #[serde(default)]
    pub linear: Option<[[f64; 3]; 3]>,
    /// kg/m³
    #[serde(default)]
    pub density: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Accepted {
    pub api_version: u32,
    pub revision: u64,
}

impl Accepted {
    pub fn new(revision: u64) -> Self {
        Self {
            api_version: API_VERSION,
            revision,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AssetEntry {
    pub name: String,
    /// Hex SHA-256 of the file.
    pub hash: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AssetList {
    pub api_version: u32,
    pub assets: Vec<AssetEntry>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RunStatus {
    Converged,
    MaxFrames,
    Cancelled,
    Failed,
}

/// One message on the `/frames` socket.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
#[allow(non_snake_case)]
pub enum StreamMessage {
    Frame {
        revision: u64,
        #[serde(flatten)]
        record: FrameRecord,
    },
    /// Ends every run. `revision` is the one that installed the final state.
    Status {
        revision: u64,
        status: RunStatus,
        converged: bool,
        /// Simulated steps.
        frames: usize,
        D: Option<f64>,
        R: Option<f64>,
        error: Option<String>,
    },
}

impl StreamMessage {
    pub fn to_text(&self) -> String {
        serde_json::to_string(self).expect("stream message serializes")
    }
}
