//! Error type shared by every module.

use thiserror::Error;

/// Library-wide error type.
#[derive(Debug, Error)]
pub enum Error {
    /// An argument violated a documented precondition.
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// Two operands disagree on a dimension.
    #[error("dimension mismatch in {context}: expected {expected}, got {got}")]
    DimensionMismatch {
        context: &'static str,
        expected: String,
        got: String,
    },

    /// The zero matrix has no compact SVD; its rank is zero.
    #[error("zero matrix has no compact SVD")]
    ZeroMatrix,

    /// The requested principal subspace is ill-defined because the singular
    /// value gap at the cut is below tolerance.
    #[error("principal subspace ill-defined: relative gap {gap:.3e} after index {index}")]
    IllDefinedSubspace { gap: f64, index: usize },

    /// A resampled matrix lost the rank or gap needed for a k-dimensional
    /// principal subspace.
    #[error("degenerate resample: {0}")]
    DegenerateResample(String),

    /// More than the tolerated fraction of draws were degenerate.
    #[error("ensemble aborted: {redraws} degenerate redraws over {draws} draws exceeds {limit}")]
    TooManyDegenerate {
        redraws: usize,
        draws: usize,
        limit: usize,
    },

    /// A linear solve failed; the operator is singular or indefinite beyond
    /// what the factorization tolerates.
    #[error("singular system: {context} (condition estimate {condition:.3e})")]
    SingularSystem {
        context: &'static str,
        condition: f64,
    },

    /// The iterative SVD did not converge.
    #[error("singular value decomposition did not converge")]
    SvdNoConvergence,

    /// Too few ensemble draws for the requested band level.
    #[error("too few draws: {got} draws cannot support level {level} (need at least {min})")]
    TooFewDraws { got: usize, min: usize, level: f64 },

    /// Every candidate evaluation failed during training.
    #[error("training failed: no concentration candidate could be evaluated")]
    NoViableCandidate,

    /// Filesystem failure while reading or writing artifacts.
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    /// A text artifact could not be parsed.
    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// Shorthand for invalid-input errors built from format strings.
    pub fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }
}
