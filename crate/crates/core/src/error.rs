use thiserror::Error;

/// Errors raised by the library, grouped by the module that detects them.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("geometry: {0}")]
    Geometry(String),

    #[error("loop: {0}")]
    Loop(String),

    #[error("surface: {0}")]
    Surface(String),

    #[error("solver: {0}")]
    Solver(String),

    #[error("verification: {0}")]
    Verify(String),
}

impl Error {
    pub(crate) fn geometry(msg: impl Into<String>) -> Self {
        Error::Geometry(msg.into())
    }

    pub(crate) fn looperr(msg: impl Into<String>) -> Self {
        Error::Loop(msg.into())
    }

    pub(crate) fn surface(msg: impl Into<String>) -> Self {
        Error::Surface(msg.into())
    }

    pub(crate) fn solver(msg: impl Into<String>) -> Self {
        Error::Solver(msg.into())
    }

    pub(crate) fn verify(msg: impl Into<String>) -> Self {
        Error::Verify(msg.into())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
