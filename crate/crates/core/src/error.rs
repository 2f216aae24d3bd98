use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, SpicError>;

#[derive(Debug, Error)]
pub enum SpicError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    /// Malformed input file; `line` is 1-based, 0 when the whole file is at fault.
    #[error("{file}:{line}: {message}")]
    Parse { file: String, line: usize, message: String },

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("non-finite value after propagation iteration {iteration}; enable column normalization")]
    NonFinite { iteration: usize },

    #[error("spectral oracle: {0}")]
    Oracle(String),

    #[error("training diverged at epoch {epoch} (loss is not finite)")]
    Divergence { epoch: usize },

    #[error("empty {0} mask")]
    EmptyMask(&'static str),
}

impl SpicError {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        SpicError::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn parse(file: &str, line: usize, message: impl Into<String>) -> Self {
        SpicError::Parse {
            file: file.to_string(),
            line,
            message: message.into(),
        }
    }
}
