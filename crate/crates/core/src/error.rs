use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("degenerate point set")]
    DegeneratePointSet,
    #[error("degenerate subset")]
    DegenerateSubset,
    #[error("coincident lines")]
    CoincidentLines,
    #[error("distance undefined for ideal point")]
    IdealPoint,
    #[error("point behind camera")]
    PointBehindCamera,
    #[error("insufficient lines for VP")]
    InsufficientLines,
    #[error("weight collapse")]
    WeightCollapse,
    #[error("degenerate refinement")]
    DegenerateRefinement,
    #[error("no vanishing point found")]
    NoVanishingPoint,
    #[error("image too small: {width}x{height} (minimum {min}x{min})")]
    ImageTooSmall { width: usize, height: usize, min: usize },
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("invalid config: {0}")]
    Config(String),
    #[error("{path}:{line}: {message}")]
    Parse { path: PathBuf, line: u64, message: String },
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("image: {0}")]
    Image(#[from] image::ImageError),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }

    pub(crate) fn parse(path: impl Into<PathBuf>, line: u64, message: impl Into<String>) -> Self {
        Error::Parse { path: path.into(), line, message: message.into() }
    }
}
