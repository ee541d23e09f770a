use thiserror::Error;

pub type Result<T> = std::result::Result<T, BoundsError>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum BoundsError {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("sample grid is not sorted ascending at index {index}")]
    UnsortedGrid { index: usize },

    #[error("grid position {position} lies outside [0, {t0}]")]
    GridOutOfRange { position: f64, t0: f64 },

    #[error("covariance factorization failed (degenerate sample geometry)")]
    Factorization,

    #[error("symmetric eigensolver failed to converge")]
    Eigensolver,

    #[error("quadrature order {0} is below the minimum of 2")]
    QuadratureOrder(usize),

    #[error("bisection did not converge after {iterations} iterations (residual {residual:e})")]
    NonConvergence { iterations: usize, residual: f64 },

    #[error("eigen sequence has no analytic tail but an infinite sum was requested")]
    MissingTail,

    #[error("power law violates the achievable-rate growth condition; the rate tends to a constant")]
    RateConditionViolated,

    #[error("upper bound not applicable in the {regime} regime")]
    NotApplicable { regime: &'static str },

    #[error("need at least {needed} rows for a fit, got {got}")]
    InsufficientRows { needed: usize, got: usize },

    #[error("Monte Carlo needs at least 100 trials, got {0}")]
    TooFewTrials(usize),
}

impl BoundsError {
    /// Name of the module that raised the error, used in CLI diagnostics.
    pub fn module(&self) -> &'static str {
        match self {
            BoundsError::InvalidParameter { .. } => "config",
            BoundsError::UnsortedGrid { .. } | BoundsError::GridOutOfRange { .. } => "ou-process",
            BoundsError::Factorization | BoundsError::QuadratureOrder(_) => "sampling-mmse",
            BoundsError::TooFewTrials(_) => "sampling-mmse",
            BoundsError::Eigensolver => "achievable",
            BoundsError::NonConvergence { .. } | BoundsError::MissingTail => "rate-distortion",
            BoundsError::RateConditionViolated => "capacity",
            BoundsError::NotApplicable { .. } => "achievable",
            BoundsError::InsufficientRows { .. } => "tradeoff-report",
        }
    }
}

pub(crate) fn positive(name: &'static str, value: f64) -> Result<f64> {
    if value.is_finite() && value > 0.0 {
        Ok(value)
    } else {
        Err(BoundsError::InvalidParameter {
            name,
            reason: format!("must be finite and positive, got {value}"),
        })
    }
}
