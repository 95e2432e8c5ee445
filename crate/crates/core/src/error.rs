//! Crate-wide error type.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("length mismatch: expected {expected} {what}, got {got}")]
    LengthMismatch {
        what: &'static str,
        expected: usize,
        got: usize,
    },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("parameter arity mismatch: {0}")]
    ParamArity(String),

    #[error("degenerate stream: {0}")]
    DegenerateStream(String),

    #[error("empty batch")]
    EmptyBatch,

    #[error("training diverged at step {step}: loss {loss}")]
    Diverged { step: usize, loss: f64 },

    #[error("unsorted input: x values must be non-decreasing")]
    UnsortedInput,

    #[error("unsupported params schema version {0}")]
    SchemaVersion(u32),

    #[error("params file error: {0}")]
    ParamsFormat(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
