//! Crate-wide error type.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("value out of range: {0}")]
    OutOfRange(String),

    #[error("empty input: {0}")]
    EmptyInput(String),

    #[error("bad network architecture: {0}")]
    BadArchitecture(String),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("no training samples")]
    NoSamples,

    #[error("invalid configuration: {0}")]
    ConfigInvalid(String),

    #[error("schema violation: {0}")]
    SchemaViolation(String),

    #[error("unknown metadata word: {0}")]
    UnknownMetadataWord(String),

    #[error("usage {0} has no ratings against a labeled service")]
    UnratedUsage(String),

    #[error("expectation vector sums to zero")]
    ZeroExpectation,

    #[error("usage pattern has zero total duration")]
    ZeroTotalDuration,

    #[error("length mismatch: {0}")]
    LengthMismatch(String),

    #[error("usage history is empty")]
    EmptyHistory,

    #[error("too few records: {0}")]
    TooFewRecords(String),

    #[error("dataset failed validation: {0}")]
    InvalidDataset(String),

    #[error("parse error in {location}: {message}")]
    Parse { location: String, message: String },

    #[error("unsupported format version {found} (expected {expected})")]
    VersionMismatch { expected: u32, found: u32 },

    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn parse(location: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Parse {
            location: location.into(),
            message: message.into(),
        }
    }

    pub(crate) fn io(path: impl Into<String>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
