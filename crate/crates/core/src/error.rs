use std::path::PathBuf;

use crate::model::Weather;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("no severity entry for {weather} at level {level}")]
    InvalidSeverity { weather: Weather, level: u8 },

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("depth grid has no valid pixel")]
    EmptyDepth,

    #[error("ground truth has no valid pixel")]
    EmptyGroundTruth,

    #[error("dimension mismatch: expected {expected:?}, found {found:?}")]
    DimensionMismatch {
        expected: (usize, usize),
        found: (usize, usize),
    },

    #[error("degenerate affine fit ({count} samples, variance {variance:e})")]
    DegenerateFit { count: usize, variance: f64 },

    #[error("occluder library has no {0} masks")]
    NoMasks(String),

    #[error("codec error: {0}")]
    Codec(String),

    #[error("layout error: {0}")]
    Layout(String),

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("frame {frame} [{condition}]: {source}")]
    Frame {
        frame: String,
        condition: String,
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
}
