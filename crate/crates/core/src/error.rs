use thiserror::Error;

use crate::nifti::NiftiError;
use crate::volume::Dims;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("shape mismatch: {what} has dims {found:?}, expected {expected:?}")]
    ShapeMismatch {
        what: &'static str,
        expected: Dims,
        found: Dims,
    },

    #[error("empty input: {0}")]
    EmptyInput(String),

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error(transparent)]
    Nifti(#[from] NiftiError),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

/// Coarse error category, stable across releases. The CLI maps these onto
/// process exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    Parameter,
    Format,
    Degenerate,
}

impl Error {
    pub fn kind(&self) -> ErrorKind {
        match self {
            Error::Parameter(_) | Error::ShapeMismatch { .. } => ErrorKind::Parameter,
            Error::Nifti(_) | Error::Io(_) => ErrorKind::Format,
            Error::EmptyInput(_) | Error::Degenerate(_) => ErrorKind::Degenerate,
        }
    }

    pub(crate) fn param(msg: impl Into<String>) -> Self {
        Error::Parameter(msg.into())
    }

    pub(crate) fn empty(msg: impl Into<String>) -> Self {
        Error::EmptyInput(msg.into())
    }
}

pub(crate) fn ensure_same_dims(what: &'static str, expected: Dims, found: Dims) -> Result<()> {
    if expected != found {
        return Err(Error::ShapeMismatch { what, expected, found });
    }
    Ok(())
}
