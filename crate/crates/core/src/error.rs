use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    /// Column `column` of Z has no entries where a non-empty column is required.
    #[error("column {column} of Z is all zeros")]
    ZeroColumn { column: usize },

    #[error("precondition violated: {0}")]
    Precondition(String),

    /// Every candidate value of a conditional draw has zero probability.
    #[error("model degeneracy: {0}")]
    Degenerate(String),

    #[error(
        "rejection sampling exhausted after {tries} tries without K+ = {target} \
         (estimated acceptance rate < {rate_bound:.2e})"
    )]
    RejectionExhausted {
        tries: usize,
        target: usize,
        rate_bound: f64,
    },

    #[error("enumeration needs 2^{needed_bits} states, cap is 2^{cap_bits}")]
    EnumerationCap { needed_bits: usize, cap_bits: usize },

    #[error("unknown structure `{0}`")]
    UnknownStructure(String),

    #[error("{path}: line {line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    /// The trace file ends in a line that does not parse.
    #[error("{path}: truncated trace, line {line} does not parse")]
    TruncatedTrace { path: PathBuf, line: usize },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn dims(msg: impl Into<String>) -> Self {
        Error::DimensionMismatch(msg.into())
    }
}
