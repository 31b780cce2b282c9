use std::time::Duration;

use thiserror::Error;

/// Errors shared across the crate. Variants mirror the failure modes of the
/// individual operations; most functions can only ever produce a small
/// subset of them.
#[derive(Debug, Error)]
pub enum Error {
    #[error("line {line}: row has width {got}, expected {expected}")]
    MixedWidth {
        line: usize,
        expected: usize,
        got: usize,
    },

    #[error("line {line}: symbol {symbol:?} is not in {{1,2,3}}")]
    BadSymbol { line: usize, symbol: char },

    #[error("line {line}: duplicate row {row:?}")]
    DuplicateRow { line: usize, row: String },

    #[error("row widths differ: {0} vs {1}")]
    WidthMismatch(usize, usize),

    #[error("{what}: size {got} exceeds supported limit {limit}")]
    SizeLimit {
        what: &'static str,
        limit: usize,
        got: usize,
    },

    #[error("subset size {0} out of range (must be 2 or 3)")]
    BadSubsetSize(usize),

    #[error("solver timed out after {0:.1?}")]
    SolverTimeout(Duration),

    #[error("solver failed: {0}")]
    SolverCrash(String),

    #[error("canceled")]
    Canceled,

    #[error("checkpoint I/O: {0}")]
    CheckpointIo(#[from] std::io::Error),

    #[error("checkpoint mismatch: {0}")]
    VersionMismatch(String),

    #[error("insufficient witnesses for ({s},{k}): need {need}, found {found}")]
    InsufficientWitnesses {
        s: usize,
        k: usize,
        need: usize,
        found: usize,
    },

    #[error("{0}")]
    Invalid(String),
}
