use std::path::{Path, PathBuf};

use thiserror::Error;

/// Unified error type for the library.
///
/// Anything that reaches a caller is one of three things: the input broke a
/// documented precondition, the operating system refused an I/O request, or a
/// file existed but its bytes did not parse as the advertised format. I/O and
/// format errors always carry the offending path.
#[derive(Debug, Error)]
pub enum OdtError {
    #[error("invalid input: {0}")]
    Validation(String),

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{}: {detail}", path.display())]
    Format { path: PathBuf, detail: String },
}

impl OdtError {
    pub fn validation(msg: impl Into<String>) -> Self {
        OdtError::Validation(msg.into())
    }

    pub fn io(path: impl AsRef<Path>, source: std::io::Error) -> Self {
        OdtError::Io {
            path: path.as_ref().to_path_buf(),
            source,
        }
    }

    pub fn format(path: impl AsRef<Path>, detail: impl Into<String>) -> Self {
        OdtError::Format {
            path: path.as_ref().to_path_buf(),
            detail: detail.into(),
        }
    }
}

pub type Result<T> = std::result::Result<T, OdtError>;
