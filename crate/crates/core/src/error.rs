use std::io;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("capacity exceeded: {0}")]
    Capacity(String),

    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("numerical failure: {0}")]
    Numerical(String),

    /// Gradient descent on the data term blew up.
    #[error("step size too large: residual grew from {initial:.6e} to {current:.6e} after {step} steps")]
    StepSize { initial: f64, current: f64, step: usize },

    #[error("missing capability: {0}")]
    Capability(String),

    #[error("protocol error: {0}")]
    Protocol(String),

    #[error("connectivity error: {0}")]
    Connectivity(String),

    #[error("format error: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] io::Error),
}

impl Error {
    pub(crate) fn dim(msg: impl Into<String>) -> Self {
        Error::Dimension(msg.into())
    }

    pub(crate) fn param(msg: impl Into<String>) -> Self {
        Error::Parameter(msg.into())
    }
}
