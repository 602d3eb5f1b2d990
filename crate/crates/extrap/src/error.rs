use thiserror::Error;

/// Errors produced by model construction, fitting and search.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch in {context}: expected {expected}, got {got}")]
    DimensionMismatch {
        context: &'static str,
        expected: usize,
        got: usize,
    },

    #[error("invalid parameter {name}: {reason}")]
    InvalidParameter { name: String, reason: String },

    #[error("invalid data: {0}")]
    InvalidData(String),

    #[error(
        "ill-conditioned model: factorization failed after jitter escalation up to {max_jitter:e}; \
         closest point pair is #{i} and #{j} at scaled distance {distance:e}"
    )]
    IllConditioned {
        i: usize,
        j: usize,
        distance: f64,
        max_jitter: f64,
    },

    #[error("degenerate basis: {0}")]
    DegenerateBasis(String),

    #[error("no feasible candidate: {0}")]
    NoFeasibleCandidate(String),

    #[error("unsupported operation: {0}")]
    Unsupported(String),

    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),

    #[error("CSV error: {0}")]
    Csv(#[from] csv::Error),

    #[error("JSON error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
