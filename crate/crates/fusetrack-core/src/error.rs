use thiserror::Error;

/// Errors produced by the core library.
#[derive(Debug, Error)]
pub enum CoreError {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("invalid detection: {0}")]
    InvalidDetection(String),

    #[error("invalid config: {0}")]
    InvalidConfig(String),

    #[error("kalman filter: {0}")]
    Kalman(String),

    #[error("evaluation: {0}")]
    Eval(String),

    #[error("scenario: {0}")]
    Scenario(String),

    #[error("data: {0}")]
    Data(String),

    #[error("io: {0}")]
    Io(#[from] std::io::Error),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}
