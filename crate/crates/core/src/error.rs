use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("non-finite value at band {band}, pixel {pixel}")]
    NonFinite { band: usize, pixel: usize },

    #[error("non-finite value in {0}")]
    NonFiniteInput(&'static str),

    #[error("empty input: {0}")]
    Empty(&'static str),

    #[error("rank {rank} out of range 1..={bands}")]
    RankOutOfRange { rank: usize, bands: usize },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("format error: {0}")]
    Format(String),

    #[error("unrecognized format: {}", .0.display())]
    UnrecognizedFormat(PathBuf),

    #[error("checkpoint error: {0}")]
    Checkpoint(String),

    #[error("scale mismatch: model is x{model}, job requested x{requested}")]
    ScaleMismatch { model: usize, requested: usize },

    #[error("operator is not trainable")]
    NotTrainable,

    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),

    #[error("JSON error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Whether the error stems from bad user input (arguments, file formats)
    /// rather than a failed computation.
    pub fn is_usage(&self) -> bool {
        matches!(
            self,
            Error::InvalidArgument(_)
                | Error::RankOutOfRange { .. }
                | Error::Format(_)
                | Error::UnrecognizedFormat(_)
                | Error::ScaleMismatch { .. }
                | Error::Json(_)
        )
    }
}
