use thiserror::Error;

use crate::expr::ExprError;
use crate::jets::JetError;
use crate::linalg::LinalgError;

/// Errors raised by the curvature engine and the (alpha, beta) checkers.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("sample outside the metric domain: {0}")]
    Domain(String),
    #[error("singular fundamental tensor: {0}")]
    SingularMetric(String),
    #[error("a_ij is not positive definite at the evaluation point")]
    NotPositiveDefinite,
    #[error("degenerate value: {0}")]
    DegenerateValue(String),
    #[error("flag plane is degenerate (u is parallel to y)")]
    DegeneratePlane,
    #[error("Einstein precondition fails: residual {residual:e} above {tolerance:e}")]
    NotEinstein { residual: f64, tolerance: f64 },
    #[error("invalid input: {0}")]
    Invalid(String),
    #[error(transparent)]
    Jet(#[from] JetError),
    #[error(transparent)]
    Expr(#[from] ExprError),
}

impl Error {
    /// True for errors caused by where a sample lies (singular sets, domain
    /// boundaries) rather than by malformed input.
    pub fn is_sample_local(&self) -> bool {
        match self {
            Error::Domain(_)
            | Error::SingularMetric(_)
            | Error::NotPositiveDefinite
            | Error::DegenerateValue(_)
            | Error::DegeneratePlane
            | Error::NotEinstein { .. } => true,
            Error::Jet(e) | Error::Expr(ExprError::Jet(e)) => {
                matches!(e, JetError::DomainError { .. } | JetError::DegenerateValue { .. })
            }
            _ => false,
        }
    }
}

impl From<LinalgError> for Error {
    fn from(e: LinalgError) -> Self {
        match e {
            LinalgError::NotPositiveDefinite => Error::SingularMetric("not positive definite".into()),
            other => Error::SingularMetric(other.to_string()),
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
