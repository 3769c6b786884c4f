use std::io;
use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Errors produced by the mapping pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}: line {line}: {msg}")]
    Parse {
        path: String,
        line: usize,
        msg: String,
    },

    #[error("unknown {kind} `{id}`")]
    Lookup { kind: &'static str, id: String },

    #[error("validation failed: {0}")]
    Validation(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("invalid state: {0}")]
    State(String),

    #[error("non-finite gradient in parameter `{param}`")]
    NonFinite { param: String },

    #[error("vocabulary is empty (no token reaches min_count {min_count})")]
    EmptyVocab { min_count: u64 },

    #[error("token `{0}` is out of vocabulary and no OOV vector is configured")]
    MissingOov(String),

    #[error("phrase `{0}` contains no tokens")]
    EmptyPhrase(String),

    #[error("query vector has zero norm; cosine similarity is undefined")]
    DegenerateQuery,

    #[error("invariant violated: {0}")]
    Invariant(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn parse(path: impl AsRef<str>, line: usize, msg: impl Into<String>) -> Self {
        Error::Parse {
            path: path.as_ref().to_owned(),
            line,
            msg: msg.into(),
        }
    }

    /// True for errors caused by bad inputs or configuration rather than by
    /// the runtime environment. The CLI maps these to exit code 2.
    pub fn is_validation(&self) -> bool {
        matches!(
            self,
            Error::Parse { .. }
                | Error::Lookup { .. }
                | Error::Validation(_)
                | Error::Config(_)
                | Error::Shape(_)
                | Error::EmptyVocab { .. }
                | Error::MissingOov(_)
                | Error::EmptyPhrase(_)
        )
    }
}
