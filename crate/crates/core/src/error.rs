use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{file}:{line}: {message}")]
    Parse { file: String, line: usize, message: String },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("invalid training parameters: {0}")]
    Params(String),

    #[error("empty vocabulary: no token reaches min_count {min_count}")]
    EmptyVocabulary { min_count: u64 },

    #[error("token not in vocabulary: {0:?}")]
    NotFound(String),

    #[error("non-finite value in {what} after {tokens} processed tokens (run seed {seed})")]
    NonFinite { what: &'static str, tokens: u64, seed: u64 },

    #[error("model file {path}: {message}")]
    ModelFormat { path: PathBuf, message: String },

    #[error("degenerate category {0:?}: no usable token vectors")]
    DegenerateCategory(String),

    #[error(
        "rank-deficient category set: {category:?} is linearly dependent on earlier categories (residual {residual:e})"
    )]
    RankDeficient { category: String, residual: f64 },

    #[error("similarity undefined: zero-norm vector")]
    ZeroNorm,

    #[error("correlation undefined: {0}")]
    UndefinedCorrelation(String),

    #[error("no shared categories across the supplied lexicons")]
    EmptySchema,

    #[error("stage `{stage}` failed: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub fn parse(file: impl Into<String>, line: usize, message: impl Into<String>) -> Self {
        Error::Parse {
            file: file.into(),
            line,
            message: message.into(),
        }
    }
}
