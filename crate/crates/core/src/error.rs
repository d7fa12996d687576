use std::path::PathBuf;

use thiserror::Error;

/// Broad failure category, used by the command line to pick an exit code.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    Config,
    Backend,
    Data,
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("text is empty after trimming")]
    EmptyText,
    #[error("word `{0}` is not in the vocabulary")]
    OutOfVocabulary(String),
    #[error("token id {0} is outside the vocabulary")]
    UnknownTokenId(u32),
    #[error("token prefix must start with the BOS id {bos}")]
    MalformedPrefix { bos: u32 },
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("vector has zero norm and cannot be normalized")]
    ZeroNorm,
    #[error("mean embedding of the image set is degenerate (zero norm)")]
    DegenerateMean,
    #[error("image set is empty")]
    EmptySet,

    #[error("backend unreachable at {url}: {reason}")]
    BackendUnreachable { url: String, reason: String },
    #[error("backend returned HTTP {status}: {message}")]
    Remote { status: u16, message: String },
    #[error("invalid backend specification: {0}")]
    InvalidBackend(String),

    #[error("bad magic bytes in embedding file {0}")]
    BadMagic(PathBuf),
    #[error("embedding file {path} is truncated: expected {expected} payload bytes, found {found}")]
    Truncated {
        path: PathBuf,
        expected: usize,
        found: usize,
    },
    #[error("id sidecar has {ids} lines but the embedding file holds {count} rows")]
    IdCountMismatch { ids: usize, count: usize },

    #[error("hypernym cycle through `{0}`")]
    Cycle(String),
    #[error("edge references unknown lemma `{0}`")]
    UnknownLemma(String),
    #[error("line {line}: {reason}")]
    MalformedLine { line: usize, reason: String },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub fn kind(&self) -> ErrorKind {
        match self {
            Error::BackendUnreachable { .. } | Error::Remote { .. } => ErrorKind::Backend,
            Error::InvalidBackend(_) | Error::InvalidArgument(_) => ErrorKind::Config,
            _ => ErrorKind::Data,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
