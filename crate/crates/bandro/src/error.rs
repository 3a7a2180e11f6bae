use thiserror::Error;

use crate::lp::LpError;

/// Crate-wide error type.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("data error: {0}")]
    Data(String),
    #[error("band construction: {0}")]
    Band(String),
    #[error("linear program: {0}")]
    Lp(#[from] LpError),
    #[error("infeasible band: {0}")]
    InfeasibleBand(String),
    #[error("solver diverged: {0}")]
    Divergence(String),
    #[error("experiment failed: {0}")]
    Experiment(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }
}
