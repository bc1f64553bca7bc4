use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("document {doc_id}: {message}")]
    Invariant { doc_id: String, message: String },

    #[error("duplicate doc_id {0:?}")]
    DuplicateDocument(String),

    #[error("topic {0} appears in more than one split")]
    OverlappingTopics(u32),

    #[error("position (sentence {sentence}, token {token}) is out of range in document {doc_id}")]
    PositionOutOfRange {
        doc_id: String,
        sentence: usize,
        token: usize,
    },

    #[error("dimension mismatch in {context}: expected {expected}, got {actual}")]
    Dimension {
        context: &'static str,
        expected: usize,
        actual: usize,
    },

    #[error("non-finite value in {path}")]
    NonFinite { path: String },

    #[error("{0} is empty")]
    Empty(&'static str),

    #[error("document {doc_id}: unknown mention {mention_id:?}")]
    UnknownMention { doc_id: String, mention_id: String },

    #[error("document sets differ: {0}")]
    DocumentMismatch(String),

    #[error("vocabulary fingerprint {found} does not match the corpus ({expected})")]
    VocabMismatch { expected: String, found: String },

    #[error("checkpoint: {0}")]
    Checkpoint(String),

    #[error("config: {0}")]
    Config(String),

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
    pub(crate) fn invariant(doc_id: &str, message: impl Into<String>) -> Self {
        Error::Invariant {
            doc_id: doc_id.to_owned(),
            message: message.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Process exit code for the command-line driver.
    ///
    /// 2 covers bad or inconsistent data, 3 numeric failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::NonFinite { .. } => 3,
            Error::Config(_) => 1,
            _ => 2,
        }
    }
}
