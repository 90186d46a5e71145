use std::io;
use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },

    /// A malformed line in one of the consumed text formats.
    #[error("{source_name}:{line}: {message}")]
    Parse {
        source_name: String,
        line: usize,
        message: String,
    },

    #[error("duplicate document id `{0}`")]
    DuplicateDocument(String),

    #[error("document `{doc_id}` is not in the indexed collection")]
    UnknownDocument { doc_id: String },

    #[error("query `{0}` is missing from the run")]
    QueryNotInRun(String),

    #[error("query `{0}` has no relevant documents")]
    NoRelevantDocuments(String),

    #[error("invalid contingency counts (r={r}, R={big_r}, n={n}, N={big_n}): violates {bound}")]
    InvalidCounts {
        r: u64,
        big_r: u64,
        n: u64,
        big_n: u64,
        bound: &'static str,
    },

    #[error("term domains differ for query `{query_id}`; missing: {missing:?}")]
    TermDomainMismatch {
        query_id: String,
        missing: Vec<String>,
    },

    #[error("collection `{0}` is empty; relative document frequency is undefined")]
    EmptyCollection(String),

    #[error("statistical test undefined: {0}")]
    UndefinedStatistic(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("{stage}: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },

    #[error("internal error: {0}")]
    Internal(String),
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub fn parse(source_name: impl Into<String>, line: usize, message: impl Into<String>) -> Self {
        Error::Parse {
            source_name: source_name.into(),
            line,
            message: message.into(),
        }
    }

    pub fn in_stage(self, stage: &'static str) -> Self {
        Error::Stage {
            stage,
            source: Box::new(self),
        }
    }

    /// Process exit code: 1 for bad input, 2 for internal failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Internal(_) => 2,
            Error::Stage { source, .. } => source.exit_code(),
            _ => 1,
        }
    }
}
