use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// Everything that can go wrong while validating inputs or building a mechanism.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("dimension mismatch in {context}: expected {expected}, found {found}")]
    DimensionMismatch {
        context: &'static str,
        expected: usize,
        found: usize,
    },

    #[error("invalid distribution: {0}")]
    InvalidDistribution(String),

    #[error("entry {index} is {value}, but a strictly positive distribution is required")]
    NotStrictlyPositive { index: usize, value: f64 },

    #[error("support violation at index {index}: p > 0 where q = 0")]
    SupportViolation { index: usize },

    #[error("matrix is numerically singular: smallest singular value {sigma_min:e} <= {threshold:e}")]
    SingularMatrix { sigma_min: f64, threshold: f64 },

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("epsilon {eps} is outside the admissible range (0, {bound})")]
    EpsilonOutOfRange { eps: f64, bound: f64 },

    #[error("perturbation direction is not orthogonal to the prior root: |<l, sqrt(p)>| = {dot:e}")]
    NotOrthogonal { dot: f64 },

    #[error("expected binary alphabets, found size {0}")]
    NotBinary(usize),

    #[error("{0}")]
    Unsupported(String),

    #[error("mechanism invariant violated: {0}")]
    InvariantViolation(String),
}
