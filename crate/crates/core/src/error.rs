use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// An input lies outside the domain of the formula.
    #[error("{name} = {value} is outside the domain: {reason}")]
    Domain {
        name: &'static str,
        value: f64,
        reason: &'static str,
    },

    #[error("spread {delta} is below the minimum attainable spread {delta_min}")]
    NoSolution { delta: f64, delta_min: f64 },

    #[error("insufficient data for {what}: need at least {need}, got {got}")]
    InsufficientData {
        what: &'static str,
        need: usize,
        got: usize,
    },

    #[error("spread-volume curve has no populated buckets")]
    EmptyCurve,

    #[error("invalid input: {0}")]
    Invalid(String),

    #[error("missing required column `{0}`")]
    MissingColumn(String),

    /// Numerical routine failed to converge. `detail` describes the best
    /// result found so far; callers that need the value itself get it from
    /// the typed error of the routine (see `calibration::FitError`).
    #[error("did not converge: {detail}")]
    NonConvergence { detail: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn domain(name: &'static str, value: f64, reason: &'static str) -> Self {
        Error::Domain { name, value, reason }
    }
}

/// Fails with a domain error unless `value` is finite and strictly positive.
pub(crate) fn ensure_positive(name: &'static str, value: f64) -> Result<f64> {
    if value.is_finite() && value > 0.0 {
        Ok(value)
    } else {
        Err(Error::domain(name, value, "must be finite and > 0"))
    }
}

pub(crate) fn ensure_non_negative(name: &'static str, value: f64) -> Result<f64> {
    if value.is_finite() && value >= 0.0 {
        Ok(value)
    } else {
        Err(Error::domain(name, value, "must be finite and >= 0"))
    }
}
