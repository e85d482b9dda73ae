use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("{value} lies outside the support [{lo}, {hi}]")]
    OutOfSupport { value: f64, lo: f64, hi: f64 },

    #[error("density vanishes at c = {0}")]
    ZeroDensity(f64),

    #[error("density is unbounded at c = {0}")]
    UnboundedDensity(f64),

    #[error("no root: {0}")]
    NoRoot(String),

    #[error("solver did not converge: {0}")]
    NonConvergence(String),

    /// The principal's per-agent fixed points imply different prizes.
    #[error("implied prizes disagree (spread {spread:e})")]
    PrizeDisagreement {
        spread: f64,
        thresholds: Vec<f64>,
        implied_prizes: Vec<f64>,
    },
}

impl Error {
    /// Whether the error reflects bad input rather than a numerical failure.
    pub fn is_validation(&self) -> bool {
        matches!(
            self,
            Error::InvalidParameter(_)
                | Error::OutOfSupport { .. }
                | Error::ZeroDensity(_)
                | Error::UnboundedDensity(_)
                | Error::NoRoot(_)
        )
    }
}

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidParameter(msg.into())
}

pub(crate) fn ensure_finite(name: &str, x: f64) -> Result<()> {
    if x.is_finite() {
        Ok(())
    } else {
        Err(invalid(format!("{name} must be finite, got {x}")))
    }
}

pub(crate) fn ensure_probability(name: &str, q: f64) -> Result<()> {
    ensure_finite(name, q)?;
    if q > 0.0 && q <= 1.0 {
        Ok(())
    } else {
        Err(invalid(format!("{name} must lie in (0, 1], got {q}")))
    }
}
