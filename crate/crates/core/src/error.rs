use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum PmlError {
    /// An iterative kernel failed to converge or a factorization broke down.
    #[error("numerical failure in {op}: {reason}")]
    Numerical { op: &'static str, reason: String },

    #[error("non-finite value in input to {op}")]
    NonFinite { op: &'static str },

    #[error("dimension mismatch in {op}: {detail}")]
    Dimension { op: &'static str, detail: String },

    /// A documented precondition does not hold (asymmetric input, bad parameter, ...).
    #[error("contract violation in {op}: {detail}")]
    Contract { op: &'static str, detail: String },

    #[error("{path}:{line}: {msg}")]
    Format {
        path: String,
        line: usize,
        msg: String,
    },

    #[error("file not found: {}", .0.display())]
    NotFound(PathBuf),

    #[error("I/O error on {}: {source}", .path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("invalid configuration: {0}")]
    Config(String),
}

impl PmlError {
    pub(crate) fn dim(op: &'static str, detail: impl Into<String>) -> Self {
        PmlError::Dimension {
            op,
            detail: detail.into(),
        }
    }

    pub(crate) fn contract(op: &'static str, detail: impl Into<String>) -> Self {
        PmlError::Contract {
            op,
            detail: detail.into(),
        }
    }

    pub(crate) fn numerical(op: &'static str, reason: impl Into<String>) -> Self {
        PmlError::Numerical {
            op,
            reason: reason.into(),
        }
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        let path = path.into();
        if source.kind() == std::io::ErrorKind::NotFound {
            PmlError::NotFound(path)
        } else {
            PmlError::Io { path, source }
        }
    }

    /// True for failures that originate in the numerical kernels rather than in
    /// the inputs or configuration.
    pub fn is_numerical(&self) -> bool {
        matches!(self, PmlError::Numerical { .. })
    }
}

pub type Result<T> = std::result::Result<T, PmlError>;
