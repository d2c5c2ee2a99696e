use thiserror::Error;

#[derive(Debug, Error)]
pub enum McfError {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("matrix is not symmetric positive definite")]
    NotPositiveDefinite,

    #[error("missing covariant derivative of the second fundamental form")]
    MissingGradient,

    #[error("immersion degenerates at node {node} (det g = {det:e})")]
    Degenerate { node: usize, det: f64 },

    #[error("flow became singular; last valid time {last_time}")]
    Singularity { last_time: f64, reason: String },

    #[error("non-uniform snapshot spacing: {0}")]
    NonUniformSpacing(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, McfError>;
