//! Crate-wide error type.

use thiserror::Error;

/// Errors produced by channel synthesis, code handling, simulation and the
/// benchmarking harness.
#[derive(Debug, Error)]
pub enum Error {
    /// A dimension was zero or otherwise outside the supported range.
    #[error("invalid dimension: {0}")]
    InvalidDimension(String),

    /// Inputs were inconsistent with each other or with a contract.
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// A channel shape the receiver does not support (e.g. more observations
    /// than symbols).
    #[error("unsupported shape: {0}")]
    UnsupportedShape(String),

    /// A problem size beyond what exhaustive routines can handle.
    #[error("unsupported size: {0}")]
    UnsupportedSize(String),

    /// A code object violates a structural requirement.
    #[error("invalid code: {0}")]
    InvalidCode(String),

    /// Randomized construction did not succeed within the attempt budget.
    #[error("construction failed: {0}")]
    Construction(String),

    /// Input carries no usable information (e.g. all-zero channel estimate).
    #[error("degenerate input: {0}")]
    DegenerateInput(String),

    /// A linear-algebra routine failed; the message carries conditioning
    /// diagnostics.
    #[error("numerical failure: {0}")]
    Numerical(String),

    /// Weight container did not match the expected architecture.
    #[error("weight mismatch: {0}")]
    WeightMismatch(String),

    /// Malformed code file, weight file or configuration.
    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
