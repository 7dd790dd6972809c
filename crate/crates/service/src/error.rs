use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::Json;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ServiceError {
    #[error("a simulation is in progress")]
    Conflict,

    #[error("malformed request: {0}")]
    BadRequest(String),

    #[error("no asset named `{0}`")]
    UnknownAsset(String),

    #[error("session has shut down")]
    Closed,

    #[error(transparent)]
    Core(#[from] layoutsim::Error),
}

impl ServiceError {
    pub fn category(&self) -> &'static str {
        match self {
            ServiceError::Conflict => "Conflict",
            ServiceError::BadRequest(_) => "ParseError",
            ServiceError::UnknownAsset(_) => "MissingAsset",
            ServiceError::Closed => "Closed",
            ServiceError::Core(e) => e.category(),
        }
    }

    pub fn status(&self) -> StatusCode {
        use layoutsim::Error as E;
        match self {
            ServiceError::Conflict => StatusCode::CONFLICT,
            ServiceError::BadRequest(_) => StatusCode::BAD_REQUEST,
            ServiceError::UnknownAsset(_) => StatusCode::NOT_FOUND,
            ServiceError::Closed => StatusCode::SERVICE_UNAVAILABLE,
            ServiceError::Core(e) => match e {
                E::UnknownObject(_) | E::MissingAsset(_) => StatusCode::NOT_FOUND,
                E::Parse { .. }
                | E::InvalidMesh(_)
                | E::EmptyMesh
                | E::NonWatertightMesh { .. } => StatusCode::BAD_REQUEST,
                E::DuplicateObject(_)
                | E::CyclicDependency(_)
                | E::AmbiguousParent { .. }
                | E::ChildExceedsParent { .. }
                | E::SiblingPackingFailed(_)
                | E::ZeroExtent => StatusCode::UNPROCESSABLE_ENTITY,
                _ => StatusCode::INTERNAL_SERVER_ERROR,
            },
        }
    }
}

impl IntoResponse for ServiceError {
    fn into_response(self) -> Response {
        let body = serde_json::json!({
            "error": { "category": self.category(), "message": self.to_string() }
        });
        (self.status(), Json(body)).into_response()
    }
}

pub type Result<T, E = ServiceError> = std::result::Result<T, E>;
