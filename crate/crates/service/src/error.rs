use thiserror::Error;

#[derive(Debug, Error)]
pub enum ServiceError {
    #[error("not found: {0}")]
    NotFound(String),
    /// The request is well formed but not allowed in the current phase.
    #[error("state error: {0}")]
    State(String),
    #[error("invalid request: {0}")]
    Invalid(String),
    #[error(transparent)]
    Core(#[from] wrapped_haptics::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = ServiceError> = std::result::Result<T, E>;
