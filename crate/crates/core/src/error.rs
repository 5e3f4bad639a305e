use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// Inconsistent dimensions, out-of-range parameters, malformed config.
    #[error("configuration error: {0}")]
    Config(String),

    /// Simulated noise exceeded the cumulative budget of the noise model.
    #[error("noise budget exceeded at step {step}: cumulative {cumulative} >= budget {budget}")]
    NoiseBudget {
        step: usize,
        cumulative: f64,
        budget: f64,
    },

    /// The selector chain has no unique stationary distribution.
    #[error("no unique stationary distribution: {0}")]
    NotErgodic(String),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    /// `true` for errors the CLI reports with exit code 1.
    pub fn is_configuration(&self) -> bool {
        matches!(self, Error::Config(_) | Error::Parse(_) | Error::NotErgodic(_))
    }
}

pub type Result<T> = std::result::Result<T, Error>;
