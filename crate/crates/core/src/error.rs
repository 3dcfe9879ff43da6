use thiserror::Error;

pub type Result<T> = std::result::Result<T, LqrError>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum LqrError {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("matrix is not symmetric (max asymmetry {0:e})")]
    NotSymmetric(f64),

    #[error("singular matrix (pivot {pivot:e} below threshold {threshold:e})")]
    Singular { pivot: f64, threshold: f64 },

    #[error("Lyapunov equation has no unique solution")]
    NoUniqueSolution,

    #[error("numerical failure: {0}")]
    NumericalFailure(String),

    #[error("contract violation: {0}")]
    ContractViolation(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("closed loop is not Schur stable; policy cannot be evaluated")]
    UnstablePolicy,

    #[error("kernel is not a valid optimum: {0}")]
    InvalidOptimum(String),

    #[error("no convergence: {0}")]
    NotConverged(String),

    #[error("degenerate input: {0}")]
    Degenerate(String),
}
