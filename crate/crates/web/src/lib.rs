//! In-browser demo: settle a scene, delete or add objects, and optimize a
//! layout, all on the page's own thread.
//!
//! [`Demo`] holds the logic and is plain Rust; `bindings` wraps it for
//! JavaScript and exchanges structured data as JSON strings.

mod bindings;
mod demo;

pub use demo::{Demo, ObjectView, RunSummary};
