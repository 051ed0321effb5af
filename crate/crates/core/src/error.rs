use thiserror::Error;

/// Every failure the library can report.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("dimension {dim} outside the supported range [{min}, {max}]")]
    DimensionOutOfRange { dim: usize, min: usize, max: usize },

    #[error("dimension overflow: {dim} exceeds the cap {cap}")]
    DimensionOverflow { dim: usize, cap: usize },

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("matrix is not square: {rows}x{cols}")]
    NotSquare { rows: usize, cols: usize },

    #[error("not Hermitian: max |A - A^dagger| = {deviation:.3e}")]
    NotHermitian { deviation: f64 },

    #[error("not positive semidefinite: smallest eigenvalue {min_eigenvalue:.3e}")]
    NotPositive { min_eigenvalue: f64 },

    #[error("trace is not one: |tr - 1| = {deviation:.3e}")]
    TraceNotOne { deviation: f64 },

    #[error("not normalized: |norm^2 - 1| = {deviation:.3e}")]
    NotNormalized { deviation: f64 },

    #[error("POVM element {index} is invalid: {reason}")]
    InvalidPovmElement { index: usize, reason: Box<Error> },

    #[error("POVM elements do not sum to identity: max deviation {deviation:.3e}")]
    NotComplete { deviation: f64 },

    #[error("invalid probability vector: {reason}")]
    InvalidProbabilities { reason: String },

    #[error("rank {rank} outside [1, {dim}]")]
    BadRank { rank: usize, dim: usize },

    #[error("need at least {min} outcomes, got {actual}")]
    TooFewOutcomes { min: usize, actual: usize },

    #[error("normalizer is numerically singular (condition number {condition:.3e})")]
    SingularNormalizer { condition: f64 },

    #[error("no restart converged (best gradient norm {best_gradient_norm:.3e})")]
    NoConvergence { best_gradient_norm: f64 },

    #[error("reference needs {expected} outcomes, got {actual}")]
    WrongOutcomeCount { expected: usize, actual: usize },

    #[error("reference element {index} is not rank one (second eigenvalue {second_eigenvalue:.3e})")]
    NotRankOne { index: usize, second_eigenvalue: f64 },

    #[error("reference is not informationally complete (Gram rank {gram_rank} of {needed})")]
    NotInformationallyComplete { gram_rank: usize, needed: usize },

    #[error("reference is ill conditioned (condition number {condition:.3e})")]
    IllConditionedReference { condition: f64 },

    #[error("probabilities do not correspond to a quantum state: {reason}")]
    NotAValidState { reason: Box<Error> },

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("CHSH needs 2 settings and 2 outcomes per side: {0}")]
    WrongArity(String),

    #[error("state of dimension {dim} is not bipartite with a {dim_a}-dimensional first factor")]
    NotBipartite { dim: usize, dim_a: usize },

    #[error("expected a {expected}-dimensional measurement family, got {actual}")]
    WrongDimension { expected: usize, actual: usize },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("cannot parse input: {0}")]
    Parse(String),
}

pub type Result<T> = std::result::Result<T, Error>;
