use std::path::PathBuf;

use thiserror::Error;

use crate::data::Domain;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch in {context}: expected {expected}, got {actual}")]
    DimensionMismatch {
        context: &'static str,
        expected: usize,
        actual: usize,
    },

    #[error("poisoned update in {context}: non-finite value encountered")]
    PoisonedUpdate { context: &'static str },

    #[error("domain contamination in {context}: found a {found:?}-tagged transition")]
    DomainContamination { context: &'static str, found: Domain },

    #[error("cannot sample from an empty buffer")]
    EmptyBuffer,

    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    #[error(transparent)]
    Dataset(#[from] DatasetError),

    #[error(transparent)]
    Config(#[from] ConfigError),

    #[error("checkpoint {path}: {reason}")]
    Checkpoint { path: PathBuf, reason: String },

    #[error("io error at {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum DatasetError {
    #[error("malformed dataset header: {0}")]
    MalformedHeader(String),

    #[error("truncated dataset: header declares {declared} records, file holds {available} bytes of record data ({record_size} per record)")]
    Truncated {
        declared: usize,
        available: usize,
        record_size: usize,
    },

    #[error("dataset has {extra} trailing bytes after the declared records")]
    TrailingBytes { extra: usize },

    #[error("dataset dimension mismatch: expected state/action dims {expected:?}, file has {found:?}")]
    DimensionMismatch {
        expected: (usize, usize),
        found: (usize, usize),
    },

    #[error("malformed record {index}: {reason}")]
    MalformedRecord { index: usize, reason: String },
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ConfigError {
    #[error("line {line}: expected `key = value`, got `{text}`")]
    Syntax { line: usize, text: String },

    #[error("unknown config key `{0}`")]
    UnknownKey(String),

    #[error("invalid value for `{key}`: {reason}")]
    InvalidValue { key: String, reason: String },

    #[error("missing required key `{0}`")]
    MissingKey(String),
}
