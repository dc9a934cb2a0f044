use std::path::PathBuf;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("line-count mismatch {0}/{1}/{2}")]
    LineCountMismatch(usize, usize, usize),
    #[error("malformed vector file header: {0:?}")]
    MalformedHeader(String),
    #[error("invalid split fractions: {0}")]
    InvalidSplit(String),
    #[error("invalid artifact spec: {0}")]
    InvalidArtifact(String),
    #[error("configuration error: {0}")]
    Config(String),
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("non-finite loss {loss} in batch {batch}")]
    NonFiniteLoss { batch: usize, loss: f64 },
    #[error("empty input: {0}")]
    Empty(&'static str),
    #[error("pattern set does not match parameters: {0}")]
    PatternMismatch(String),
    #[error("missing forward cache")]
    MissingCache,
    #[error("end_marker_added requires the source texts")]
    MissingSources,
    #[error("bad checkpoint: {0}")]
    Checkpoint(String),
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
}
