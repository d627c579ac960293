//! Error type shared across the crate.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// A file failed to parse; `line` is 1-based.
    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    /// Schema violates its own invariants (duplicate ids, bad ranges, ...).
    #[error("schema error: {0}")]
    Schema(String),

    /// A data row conflicts with the schema; `row` is 1-based.
    #[error("data error at row {row}: {msg}")]
    Data { row: usize, msg: String },

    /// Tensor shapes do not conform.
    #[error("shape error: {0}")]
    Shape(String),

    /// Invalid argument to an operation.
    #[error("argument error: {0}")]
    Argument(String),

    /// A numeric routine failed (non-convergence, non-finite result).
    #[error("numeric error: {0}")]
    Numeric(String),

    /// The optimizer saw a non-finite gradient.
    #[error("optimizer error in tensor '{tensor}': {msg}")]
    Optimizer { tensor: String, msg: String },

    /// A forward pass produced a non-finite activation.
    #[error("forward error in layer '{layer}': non-finite activation")]
    Forward { layer: String },

    /// A metric is undefined for the given inputs.
    #[error("metric error: {0}")]
    Metric(String),

    /// An internal API contract was violated (missing trace, wrong kind).
    #[error("contract error: {0}")]
    Contract(String),

    /// The training loop diverged.
    #[error("training diverged at epoch {epoch}, step {step}: {details}")]
    Diverged {
        epoch: usize,
        step: usize,
        details: String,
    },

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}
