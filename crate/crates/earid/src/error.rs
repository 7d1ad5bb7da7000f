use std::path::PathBuf;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error(transparent)]
    Core(#[from] earid_core::Error),
    #[error("file not found: {}", .0.display())]
    FileNotFound(PathBuf),
    #[error("unsupported image format: {}", .0.display())]
    UnsupportedFormat(PathBuf),
    #[error("corrupt image {}: {reason}", path.display())]
    CorruptImage { path: PathBuf, reason: String },
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("no images found under {}", .0.display())]
    EmptyDataset(PathBuf),
    #[error("no label could be derived for {}", .0.display())]
    NoLabelMatch(PathBuf),
    #[error("cannot read {}: {reason}", path.display())]
    UnreadableFile { path: PathBuf, reason: String },
    #[error("label pattern must be a valid regex with exactly one capture group: {0}")]
    InvalidPattern(String),
    #[error("subject {0:?} has a single image and cannot appear in both splits")]
    SingletonClass(String),
    #[error("expected schema {expected}, found {found:?}")]
    SchemaVersionMismatch { expected: String, found: String },
    #[error("malformed manifest: {0}")]
    MalformedManifest(String),
    #[error("manifest has no TRAIN records")]
    EmptyTrainSplit,
    #[error("manifest has no TEST records")]
    EmptyTestSplit,
    #[error("label {0:?} is not known to the model")]
    UnknownLabel(String),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("{}: {source}", path.display())]
    Record {
        path: PathBuf,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Self::Io {
            path: path.into(),
            source,
        }
    }

    /// Wraps an error with the record path it happened on.
    pub fn at(self, path: impl Into<PathBuf>) -> Self {
        match self {
            e @ Self::Record { .. } => e,
            e => Self::Record {
                path: path.into(),
                source: Box::new(e),
            },
        }
    }
}
