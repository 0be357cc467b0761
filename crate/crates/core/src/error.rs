use thiserror::Error;

/// Errors raised across the crate.
#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    #[error("truncation window captures negligible probability mass ({mass:e})")]
    MassTooSmall { mass: f64 },

    #[error("model {model} could not be estimated: {reason}")]
    NotEstimable { model: String, reason: String },

    #[error("objective is not finite at the starting point")]
    NonFiniteObjective,

    #[error("sample too small: need at least {needed} observations, got {got}")]
    TooFewObservations { needed: usize, got: usize },

    #[error("rejection sampler exceeded its budget (acceptance rate {rate:e})")]
    RejectionBudget { rate: f64 },

    #[error("density is numerically zero at y = {y}")]
    ZeroDensity { y: f64 },

    #[error("y = {y} lies outside the window [{lo}, {hi}]")]
    OutOfWindow { y: f64, lo: f64, hi: f64 },

    #[error("no usable observations left after cleaning")]
    EmptyAfterCleaning,

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn domain<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Domain(msg.into()))
}
