use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("malformed PCD header: {0}")]
    PcdHeader(String),

    #[error("unsupported PCD DATA encoding `{0}`")]
    UnsupportedEncoding(String),

    #[error("point count mismatch: header declares {declared}, data holds {found}")]
    PointCountMismatch { declared: usize, found: usize },

    #[error("malformed PCD data: {0}")]
    PcdData(String),

    #[error("empty point cloud")]
    EmptyCloud,

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("cloud has no normals")]
    MissingNormals,

    #[error("cloud has no color")]
    MissingColor,

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("descriptor kind mismatch: expected {expected}, found {found}")]
    KindMismatch { expected: String, found: String },

    #[error("coincident points have no pair feature")]
    CoincidentPoints,

    #[error("degenerate Darboux frame: connecting line is parallel to the source normal")]
    DegenerateFrame,

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("numeric failure: {0}")]
    Numeric(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("corrupt container: {0}")]
    Container(String),

    #[error("{stage} failed for {path}: {source}")]
    Stage {
        stage: &'static str,
        path: PathBuf,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }

    pub(crate) fn at_stage(self, stage: &'static str, path: impl Into<PathBuf>) -> Self {
        Error::Stage { stage, path: path.into(), source: Box::new(self) }
    }

    /// The innermost error, looking through stage annotations.
    pub fn root(&self) -> &Error {
        match self {
            Error::Stage { source, .. } => source.root(),
            other => other,
        }
    }

    /// True for failures of the numerical machinery rather than of the input data.
    pub fn is_numeric(&self) -> bool {
        matches!(self.root(), Error::Numeric(_))
    }
}
