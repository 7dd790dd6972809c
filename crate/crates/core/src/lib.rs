//! Differentiable affine-body simulation for physically stable 3D scene layouts.

pub mod diffsim;
pub mod edit;
pub mod error;
pub mod geometry;
pub mod layout;
pub mod metrics;
pub mod objective;
pub mod pipeline;
pub mod scene;
pub mod scenes;
pub mod sim;
pub mod state;

pub use error::{Error, Result};
pub use scene::{Layout, Scene, SceneConfig};
pub use state::AffineState;
