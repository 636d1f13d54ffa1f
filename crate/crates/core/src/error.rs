use std::path::PathBuf;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("i/o error: {0}")]
    Stream(#[from] std::io::Error),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("record {line}: {reason}")]
    Record { line: usize, reason: String },

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    Dimension { expected: usize, actual: usize },

    #[error("embedding service failed for batch items {start}..{end} after {attempts} attempts: {reason}")]
    Remote {
        start: usize,
        end: usize,
        attempts: u32,
        reason: String,
    },

    #[error("embedding failed for chunk {ordinal} of document {doc_id}: {reason}")]
    ChunkEmbedding {
        doc_id: String,
        ordinal: usize,
        reason: String,
    },

    #[error("index file {path}: {reason}")]
    IndexFormat { path: PathBuf, reason: String },

    #[error("empty candidate pool for meta-chunk {ordinal} of document {doc_id}")]
    EmptyPool { doc_id: String, ordinal: usize },

    #[error("integrity error in record {record}: {reason}")]
    Integrity { record: String, reason: String },

    #[error("not found: {0}")]
    NotFound(String),

    #[error("interrupted")]
    Interrupted,

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Short machine-readable class, printed by the CLI on failure.
    pub fn class(&self) -> &'static str {
        match self {
            Error::Io { .. } | Error::Stream(_) => "io",
            Error::Config(_) => "config",
            Error::Record { .. } => "record",
            Error::Dimension { .. } => "dimension",
            Error::Remote { .. } | Error::ChunkEmbedding { .. } => "embedding",
            Error::IndexFormat { .. } => "index-format",
            Error::EmptyPool { .. } => "empty-pool",
            Error::Integrity { .. } => "integrity",
            Error::NotFound(_) => "not-found",
            Error::Interrupted => "interrupted",
            Error::Json(_) => "json",
        }
    }
}
