use thiserror::Error;

/// Errors raised by the simulator and the inference pipeline.
#[derive(Debug, Error)]
pub enum Error {
    /// A physical input is outside the domain of the relation being evaluated.
    #[error("domain error: {param} = {value:e} ({reason})")]
    Domain {
        param: &'static str,
        value: f64,
        reason: &'static str,
    },

    /// Inconsistent or invalid configuration.
    #[error("config error: {0}")]
    Config(String),

    /// Quadrature failed to reach the requested tolerance.
    #[error("quadrature did not converge: estimate {estimate:e}, residual {residual:e}")]
    Quadrature { estimate: f64, residual: f64 },

    /// The integrator produced a non-finite state.
    #[error("non-finite state at step {step} of mode {mode}")]
    NonFinite { step: u64, mode: usize },

    /// Not enough data for the requested estimator.
    #[error("size error: need at least {needed} samples, got {got}")]
    Size { needed: usize, got: usize },

    /// A fit did not produce a physically meaningful result.
    #[error("fit error: {0}")]
    Fit(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("parse error: {0}")]
    Parse(String),
}

impl Error {
    pub(crate) fn domain(param: &'static str, value: f64, reason: &'static str) -> Self {
        Error::Domain {
            param,
            value,
            reason,
        }
    }

    /// True for errors caused by bad input or configuration rather than
    /// numerical failure.
    pub fn is_config(&self) -> bool {
        matches!(
            self,
            Error::Config(_) | Error::Domain { .. } | Error::Parse(_) | Error::Io(_)
        )
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Fails with a domain error unless `value > 0`.
pub(crate) fn require_positive<T: crate::num::Real>(param: &'static str, value: T) -> Result<()> {
    if value > T::zero() && value.is_finite() {
        Ok(())
    } else {
        Err(Error::domain(param, value.as_f64(), "must be positive and finite"))
    }
}

/// Fails with a domain error unless `value >= 0`.
pub(crate) fn require_non_negative<T: crate::num::Real>(
    param: &'static str,
    value: T,
) -> Result<()> {
    if value >= T::zero() && value.is_finite() {
        Ok(())
    } else {
        Err(Error::domain(param, value.as_f64(), "must be non-negative and finite"))
    }
}
