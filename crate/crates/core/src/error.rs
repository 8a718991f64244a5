use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("cannot access {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    /// A file did not follow one of the documented text formats.
    #[error("{what}, line {line}: {message}")]
    Format { what: String, line: usize, message: String },

    #[error("corpus is empty")]
    EmptyCorpus,

    #[error("graph is empty")]
    EmptyGraph,

    #[error("user has no seed material under activity filter {filter}")]
    NoSeedMaterial { filter: String },

    #[error("got {lists} ranked lists but {weights} weights")]
    LengthMismatch { lists: usize, weights: usize },

    #[error("invalid weight {0}: weights must be finite and nonnegative")]
    InvalidWeight(f64),

    #[error("unknown leaf `{0}`")]
    UnknownLeaf(String),

    #[error("unknown ensemble node `{0}`")]
    UnknownNode(String),

    #[error("name `{name}` appears more than once in the list for user `{user}`")]
    DuplicateInList { user: String, name: String },

    #[error("invalid configuration: {0}")]
    Config(String),

    /// A pipeline stage failed; wraps the underlying cause.
    #[error("stage `{stage}` failed: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn format(what: impl Into<String>, line: usize, message: impl Into<String>) -> Self {
        Error::Format {
            what: what.into(),
            line,
            message: message.into(),
        }
    }

    pub(crate) fn config(message: impl Into<String>) -> Self {
        Error::Config(message.into())
    }
}

pub(crate) trait StageContext<T> {
    fn stage(self, stage: &'static str) -> Result<T>;
}

impl<T> StageContext<T> for Result<T> {
    fn stage(self, stage: &'static str) -> Result<T> {
        self.map_err(|source| match source {
            already @ Error::Stage { .. } => already,
            other => Error::Stage {
                stage,
                source: Box::new(other),
            },
        })
    }
}
