use thiserror::Error;

/// Errors raised by the numerical kernels, the model checkers and the
/// simulators.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum SupouError {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("matrix is not stable: spectral abscissa {0} is not negative")]
    NotStable(f64),
    #[error("eigenvalue {0} lies on the branch cut (-inf, 0]")]
    BranchCut(String),
    #[error("ill-conditioned computation: {0}")]
    Conditioning(String),
    #[error("decay-bound mode mismatch: {0}")]
    ModeMismatch(String),
    #[error("unsupported model: {0}")]
    UnsupportedModel(String),
    #[error("quadrature failed: {0}")]
    Quadrature(String),
    #[error("truncation horizon infeasible: T = {0} exceeds 1e6")]
    TruncationInfeasible(f64),
    #[error("moment condition failed: {0}")]
    Moment(String),
    #[error("atom data missing: {0}")]
    NeedsAtoms(String),
    #[error("precondition failed: {0}")]
    Precondition(String),
    #[error("matrix is numerically not positive semi-definite: {0}")]
    NumericalPsd(String),
    #[error("data error: {0}")]
    Data(String),
    #[error("fit failed: {0}")]
    FitFailure(String),
}

impl SupouError {
    /// Coarse classification used by front ends to choose exit statuses.
    pub fn category(&self) -> ErrorCategory {
        use SupouError::*;
        match self {
            InvalidArgument(_) | Data(_) => ErrorCategory::Validation,
            NotStable(_) | ModeMismatch(_) | UnsupportedModel(_) | Moment(_) | NeedsAtoms(_)
            | Precondition(_) => ErrorCategory::Precondition,
            BranchCut(_) | Conditioning(_) | Quadrature(_) | TruncationInfeasible(_)
            | NumericalPsd(_) | FitFailure(_) => ErrorCategory::Numerical,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorCategory {
    Validation,
    Numerical,
    Precondition,
}

pub type Result<T> = std::result::Result<T, SupouError>;
