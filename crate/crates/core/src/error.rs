use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("length mismatch: expected {expected}, got {actual}")]
    LengthMismatch { expected: usize, actual: usize },

    #[error("permutation is not decomposable into reordering transpositions at position {position}: current vector {current:?}")]
    NotDecomposable { position: usize, current: Vec<f64> },

    #[error("unknown convex function `{0}`")]
    UnknownFunction(String),

    #[error("unknown discipline `{0}`")]
    UnknownDiscipline(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("unstable system: utilization {rho} >= 1")]
    Unstable { rho: f64 },

    #[error("trace generation failed: {0}")]
    Generation(String),

    #[error("contract violation: {0}")]
    Contract(String),

    #[error("inconsistent trace/schedule pairing: {0}")]
    Inconsistent(String),

    #[error("estimation error: {0}")]
    Estimation(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
