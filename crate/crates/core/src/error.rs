use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid operator: {0}")]
    InvalidOperator(String),
    #[error("zero operator where a nonzero one is required")]
    ZeroOperator,
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimMismatch { expected: usize, found: usize },
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("infeasible: {0}")]
    Infeasible(String),
    #[error("variable {0} has no value in the assignment")]
    UnboundVariable(String),
    #[error("a merger needs at least two trees, got {0}")]
    SubsetTooSmall(usize),
    #[error("measurement carries no Kraus data")]
    NoKrausData,
    #[error("factorization failed: {0}")]
    FactorizationFailure(String),
    #[error("invalid measurement: {0}")]
    InvalidMeasurement(String),
    #[error("linear program failed: {0}")]
    Lp(String),
}
