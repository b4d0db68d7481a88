use std::path::PathBuf;

use thiserror::Error;

use crate::hermite::SpectralField;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// A computation would exceed its memory budget.
    #[error("resource limit exceeded: {0}")]
    Resource(String),

    /// Adaptive integration could not continue. Carries the last accepted state.
    #[error("integration failed at t = {t}: {reason}")]
    IntegrationFailure {
        t: f64,
        reason: String,
        last_state: Box<SpectralField>,
    },

    /// A quadrature or Monte Carlo estimate did not reach the requested accuracy.
    #[error("insufficient resolution: {0}")]
    Resolution(String),

    #[error("cache file {path}: {reason}")]
    Cache { path: PathBuf, reason: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }
}
