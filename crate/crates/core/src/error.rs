use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected_w}x{expected_h}, got {got_w}x{got_h}")]
    DimensionMismatch {
        expected_w: usize,
        expected_h: usize,
        got_w: usize,
        got_h: usize,
    },

    #[error("invalid image: {0}")]
    InvalidImage(String),

    #[error("invalid region of interest: {0}")]
    InvalidRoi(String),

    #[error("region of interest contains no pixels")]
    EmptyRoi,

    #[error("invalid cell map parameters: {0}")]
    InvalidCellMap(String),

    #[error("invalid schedule: {0}")]
    InvalidSchedule(String),

    #[error("invalid pattern sequence request: {0}")]
    InvalidSequence(String),

    #[error("malformed pattern stack: {0}")]
    MalformedStack(String),

    #[error("invalid noise model: {0}")]
    InvalidNoise(String),

    #[error("reconstruction problem is unsolvable: {0}")]
    Unsolvable(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("unsupported image format for {path}: {reason}")]
    UnsupportedFormat { path: PathBuf, reason: String },

    #[error("image codec error: {0}")]
    Codec(#[from] image::ImageError),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
