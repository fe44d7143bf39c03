use std::path::PathBuf;

use thiserror::Error;

/// Errors shared across the harness, statistics, and persistence layers.
#[derive(Debug, Error)]
pub enum Error {
    /// Invalid configuration or argument values, rejected before any work starts.
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    /// A probability or other numeric argument fell outside its domain.
    #[error("domain error: {0}")]
    Domain(String),

    /// Too few samples remained to compute the requested statistic.
    #[error("insufficient data: {0}")]
    InsufficientData(String),

    /// Two runs cannot be compared because their configurations differ.
    #[error("runs are not comparable: {0}")]
    Comparability(String),

    /// Enqueue was attempted after the queue shut down, or the consumer went away.
    #[error("record queue is closed")]
    ClosedChannel,

    /// A run or trace failed a post-hoc integrity check.
    #[error("integrity violation: {0}")]
    Integrity(String),

    /// A trace, run, or history file is malformed.
    #[error("format error: {0}")]
    Format(String),

    /// Another writer holds the history lock. Retryable.
    #[error("history lock held by another writer: {}", .0.display())]
    LockBusy(PathBuf),

    /// A persisted file carries a schema version this build does not understand.
    #[error("schema mismatch: found version {found}, expected {expected}")]
    SchemaMismatch { found: u32, expected: u32 },

    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),

    #[error("JSON error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Process exit code for the CLI contract: 2 for usage and validation
    /// problems, 3 for integrity and I/O problems.
    pub fn exit_code(&self) -> u8 {
        match self {
            Error::InvalidConfig(_)
            | Error::Domain(_)
            | Error::InsufficientData(_)
            | Error::Comparability(_)
            | Error::SchemaMismatch { .. } => 2,
            Error::ClosedChannel
            | Error::Integrity(_)
            | Error::Format(_)
            | Error::LockBusy(_)
            | Error::Io(_)
            | Error::Json(_) => 3,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
