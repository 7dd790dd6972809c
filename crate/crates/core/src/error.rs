use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("degenerate primitive: {0}")]
    Degenerate(String),

    #[error("mesh has no vertices")]
    EmptyMesh,

    #[error("invalid mesh: {0}")]
    InvalidMesh(String),

    #[error("mesh is not closed or is inverted (signed volume {volume:.3e})")]
    NonWatertightMesh { volume: f64 },

    #[error("scene is empty or has zero extent")]
    ZeroExtent,

    #[error("cyclic support relations involving {0:?}")]
    CyclicDependency(Vec<String>),

    #[error("object `{child}` has more than one declared parent ({first}, {second})")]
    AmbiguousParent {
        child: String,
        first: String,
        second: String,
    },

    #[error("unknown object `{0}`")]
    UnknownObject(String),

    #[error("duplicate object id `{0}`")]
    DuplicateObject(String),

    #[error("missing asset {0}")]
    MissingAsset(PathBuf),

    #[error("{path}: {message}")]
    Parse { path: String, message: String },

    #[error("object `{child}` is larger than its parent `{parent}` on the horizontal plane")]
    ChildExceedsParent { child: String, parent: String },

    #[error("sibling packing failed; overlapping pairs: {0:?}")]
    SiblingPackingFailed(Vec<(String, String)>),

    #[error("contact distance {0:.3e} is not positive")]
    InvalidContactState(f64),

    #[error("state is not intersection-free: {0}")]
    Penetrating(String),

    #[error(
        "newton solve did not converge after {iterations} iterations (residual {residual:.3e})"
    )]
    StepDiverged { iterations: usize, residual: f64 },

    #[error("line search stalled at contact (step bound {0:.3e})")]
    StuckContact(f64),

    #[error("step jacobian is singular")]
    SingularStepJacobian,

    #[error("trajectory mismatch: {0}")]
    TrajectoryMismatch(String),

    #[error("every optimization epoch failed: {0}")]
    OptimizationFailed(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Stable machine-readable name of the error kind.
    pub fn category(&self) -> &'static str {
        match self {
            Error::Degenerate(_) => "Degenerate",
            Error::EmptyMesh => "EmptyMesh",
            Error::InvalidMesh(_) => "InvalidMesh",
            Error::NonWatertightMesh { .. } => "NonWatertightMesh",
            Error::ZeroExtent => "ZeroExtent",
            Error::CyclicDependency(_) => "CyclicDependency",
            Error::AmbiguousParent { .. } => "AmbiguousParent",
            Error::UnknownObject(_) => "UnknownObject",
            Error::DuplicateObject(_) => "DuplicateObject",
            Error::MissingAsset(_) => "MissingAsset",
            Error::Parse { .. } => "ParseError",
            Error::ChildExceedsParent { .. } => "ChildExceedsParent",
            Error::SiblingPackingFailed(_) => "SiblingPackingFailed",
            Error::InvalidContactState(_) => "InvalidContactState",
            Error::Penetrating(_) => "Penetrating",
            Error::StepDiverged { .. } => "StepDiverged",
            Error::StuckContact(_) => "StuckContact",
            Error::SingularStepJacobian => "SingularStepJacobian",
            Error::TrajectoryMismatch(_) => "TrajectoryMismatch",
            Error::OptimizationFailed(_) => "OptimizationFailed",
            Error::Io(_) => "Io",
        }
    }
}
