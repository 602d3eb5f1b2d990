use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Core(#[from] extrap::Error),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("simulator timed out after {timeout_secs} s: {command}")]
    Timeout { command: String, timeout_secs: f64 },

    #[error("simulator failed (exit status {status:?}) after retry: {command}\ncaptured output:\n{output}")]
    SimulatorFailed {
        command: String,
        status: Option<i32>,
        output: String,
    },

    #[error("cannot parse simulator output: {reason}\ncaptured output:\n{output}")]
    Parse { reason: String, output: String },

    #[error("ledger error: {0}")]
    Ledger(String),

    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),

    #[error("JSON error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
