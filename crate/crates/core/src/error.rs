use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("input is not valid UTF-8 (byte offset {offset})")]
    Encoding { offset: usize },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("parallel corpus is misaligned: {source_lines} source lines vs {target_lines} target lines")]
    Misaligned {
        source_lines: usize,
        target_lines: usize,
    },

    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("training failed: {0}")]
    Training(String),

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("search space too large: {count} complete hypotheses exceeds the limit of {limit}")]
    SearchSpace { count: u128, limit: u128 },

    #[error("no complete translation covers the input")]
    NoTranslation,

    #[error("{stage}: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    /// Tags an error with the pipeline stage that produced it.
    pub fn in_stage(self, stage: &'static str) -> Self {
        Error::Stage {
            stage,
            source: Box::new(self),
        }
    }

    pub(crate) fn param(msg: impl Into<String>) -> Self {
        Error::Parameter(msg.into())
    }

    pub(crate) fn parse(line: usize, msg: impl Into<String>) -> Self {
        Error::Parse {
            line,
            message: msg.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
