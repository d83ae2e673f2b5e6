//! One error type for the whole pipeline.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// Malformed input row; `line` is the absolute 1-based line in the source
    /// file (a header line counts).
    #[error("line {line}: {message}")]
    Parse { line: u64, message: String },

    /// An operation that requires interactions received none.
    #[error("empty log: {0}")]
    EmptyLog(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// A token cannot be written to the atomic file format without
    /// corrupting it.
    #[error("{context}: token {token:?} contains a tab or line break")]
    TokenNotPortable { token: String, context: String },

    /// Phase-2 construction found nothing outside the pruned train set.
    #[error("no phase-2 candidates: every baseline interaction already appears in the pruned train set")]
    NoCandidates,

    #[error("no evaluable users: every test set was empty")]
    NoEvaluableUsers,

    /// A model fit produced NaN/inf parameters; `sweep` is the alternation
    /// sweep (or epoch) that introduced them.
    #[error("non-finite model parameters after sweep {sweep}")]
    NonFinite { sweep: usize },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
