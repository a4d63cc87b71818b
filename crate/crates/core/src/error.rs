use thiserror::Error;

/// Errors raised by the kernel. Every fallible operation in the crate
/// returns this type.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum Error {
    #[error("division by zero")]
    DivisionByZero,
    #[error("mode mismatch: {0}")]
    ModeMismatch(String),
    #[error("operation is not available in exact mode: {0}")]
    ExactModeUnsupported(String),
    #[error("tail bound not met within {max_terms} terms")]
    MaxTermsExceeded { max_terms: usize },
    #[error("evaluation point x = 0 is not allowed")]
    ZeroEvaluationPoint,
    #[error("pole at evaluation point: factor {factor} vanishes")]
    PoleAtEvaluationPoint { factor: String },
    #[error("lower parameter b{index} = q^-{m} makes the series undefined")]
    LowerParameterPole { index: usize, m: usize },
    #[error("series diverges: {0}")]
    Divergent(String),
    #[error("domain error: {0}")]
    DomainError(String),
    #[error("invalid context: {0}")]
    InvalidContext(String),
    #[error("parse error: {0}")]
    Parse(String),
    #[error("no grid point survives pole filtering")]
    EmptyGridAfterPoleFilter,
}

impl Error {
    /// Poles are skipped by the grid harness rather than reported.
    pub fn is_pole(&self) -> bool {
        matches!(
            self,
            Error::PoleAtEvaluationPoint { .. } | Error::LowerParameterPole { .. }
        )
    }

    pub(crate) fn pole(factor: impl Into<String>) -> Self {
        Error::PoleAtEvaluationPoint {
            factor: factor.into(),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
