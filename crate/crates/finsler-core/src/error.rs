//! Crate-wide error type.

use alloc::string::String;
use alloc::vec::Vec;
use thiserror::Error;

/// Errors produced anywhere in the crate.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("variable index {index} out of range for context with {num_vars} variables")]
    IndexOutOfRange { index: usize, num_vars: usize },

    #[error("requested derivative order {requested} exceeds valid truncation order {valid}")]
    OrderExceeded { requested: usize, valid: usize },

    #[error("jet values belong to different contexts")]
    ContextMismatch,

    #[error("division by jet with zero constant term")]
    DivisionByZero,

    #[error("square root of non-positive constant term {0}")]
    NonPositiveSqrt(f64),

    #[error("singular constant-term matrix in jet linear solve")]
    SingularMatrix,

    #[error("invalid jet context: {0}")]
    InvalidContext(&'static str),

    #[error("fundamental tensor not positive definite (eigenvalues {eigenvalues:?})")]
    NotPositiveDefinite { eigenvalues: Vec<f64> },

    #[error("degenerate flag: transverse edge is parallel to the flagpole")]
    DegenerateFlag,

    #[error("point {point:?} outside the metric domain")]
    DomainViolation { point: Vec<f64> },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("invalid family parameters: {0}")]
    InvalidFamily(String),

    #[error("rank-deficient regression: {0} independent samples are not enough")]
    RankDeficient(usize),

    #[error("unknown identity check `{0}`")]
    UnknownCheck(String),

    #[error("quadrature failed to converge (estimated error {0:.3e})")]
    QuadratureNotConverged(f64),

    #[error("negative discriminant {0:.3e} in quadratic root")]
    NegativeDiscriminant(f64),

    #[error("degenerate quadratic: leading coefficient is zero")]
    DegenerateQuadratic,
}

/// Crate-wide result alias.
pub type Result<T> = core::result::Result<T, Error>;
