use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Malformed or invalid on-disk data.
#[derive(Debug, Error)]
pub enum FormatError {
    #[error("bad magic: expected {expected:?}, found {found:?}")]
    BadMagic { expected: [u8; 4], found: [u8; 4] },
    #[error("unsupported format version {0}")]
    UnsupportedVersion(u32),
    #[error("truncated payload at byte {offset}: {what} needs {needed} bytes, {available} available")]
    Truncated { offset: usize, what: &'static str, needed: usize, available: usize },
    #[error("invalid UTF-8 in {what} at byte {offset}")]
    Utf8 { offset: usize, what: &'static str },
    #[error("invalid label byte {value} at byte {offset}")]
    BadLabel { offset: usize, value: u8 },
    #[error("{count} trailing bytes after the last record at byte {offset}")]
    TrailingBytes { offset: usize, count: usize },
    #[error("{0}")]
    Invalid(String),
}

#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Format(#[from] FormatError),
    #[error(transparent)]
    Engine(#[from] mecad_core::Error),
    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: std::io::Error },
    #[error("I/O error: {0}")]
    Sink(#[from] std::io::Error),
    #[error("config: {0}")]
    Config(String),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }

    /// Whether the failure is bad input data rather than a runtime fault.
    pub fn is_validation(&self) -> bool {
        matches!(
            self,
            Error::Format(_)
                | Error::Engine(mecad_core::Error::InvalidData(_))
                | Error::Engine(mecad_core::Error::DimensionMismatch { .. })
        )
    }
}
