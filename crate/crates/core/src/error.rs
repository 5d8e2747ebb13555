use std::io;

use thiserror::Error;

use crate::tensor::Shape;

#[derive(Debug, Error)]
pub enum TensorError {
    #[error("data length {len} does not match shape {shape:?}")]
    DataLength { shape: Shape, len: usize },
    #[error("{op}: {detail}")]
    Shape { op: &'static str, detail: String },
    #[error("{op}: empty output ({detail})")]
    EmptyOutput { op: &'static str, detail: String },
    #[error("batchnorm in train mode needs at least 2 values per channel, got {count}")]
    DegenerateBatchNorm { count: usize },
    #[error("expected a scalar, got shape {shape:?}")]
    NotScalar { shape: Shape },
    #[error("parameter `{name}` has no gradient")]
    MissingGrad { name: String },
}

#[derive(Debug, Error)]
pub enum ImageError {
    #[error(transparent)]
    Io(#[from] io::Error),
    #[error("unsupported image format: {0}")]
    Unsupported(String),
    #[error("malformed PGM header: {0}")]
    Header(String),
    #[error("truncated pixel data: expected {expected} bytes, found {found}")]
    Truncated { expected: usize, found: usize },
    #[error("{0}")]
    Invalid(String),
}

#[derive(Debug, Error)]
pub enum CheckpointError {
    #[error(transparent)]
    Io(#[from] io::Error),
    #[error("not a checkpoint file (bad magic)")]
    BadMagic,
    #[error("checkpoint version {found} is not supported (expected {expected})")]
    Version { found: u32, expected: u32 },
    #[error("checkpoint truncated while reading {0}")]
    Truncated(&'static str),
    #[error("duplicate tensor name `{0}`")]
    DuplicateName(String),
    #[error("checkpoint is missing tensor `{0}`")]
    Missing(String),
    #[error("tensor `{name}`: {detail}")]
    Mismatch { name: String, detail: String },
    #[error("{0}")]
    Malformed(String),
}

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("{field}: {reason}")]
    Invalid { field: String, reason: String },
    #[error("config is not valid JSON for this schema: {0}")]
    Json(#[from] serde_json::Error),
}

impl ConfigError {
    pub fn invalid(field: impl Into<String>, reason: impl Into<String>) -> Self {
        ConfigError::Invalid {
            field: field.into(),
            reason: reason.into(),
        }
    }
}

/// Crate-level error.
#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Tensor(#[from] TensorError),
    #[error(transparent)]
    Image(#[from] ImageError),
    #[error(transparent)]
    Checkpoint(#[from] CheckpointError),
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Io(#[from] io::Error),
    #[error("corpus: {0}")]
    Corpus(String),
    #[error("non-finite loss at step {step}: {record}")]
    NonFinite { step: u64, record: String },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
