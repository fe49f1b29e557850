use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid camera rig: {0}")]
    InvalidRig(String),

    #[error("pixel ({row}, {col}) is at or above the horizon (row {horizon_row:.3})")]
    AboveHorizon { row: f64, col: f64, horizon_row: f64 },

    #[error("pixel ({row}, {col}) lies outside a {rows}x{cols} image")]
    OutOfBounds { row: f64, col: f64, rows: usize, cols: usize },

    #[error("road point depth must be positive, got {0}")]
    NonPositiveDepth(f64),

    #[error("road mask is empty")]
    EmptyRoadMask,

    #[error("dimension mismatch: {what} is {got_rows}x{got_cols}, expected {rows}x{cols}")]
    DimMismatch {
        what: &'static str,
        rows: usize,
        cols: usize,
        got_rows: usize,
        got_cols: usize,
    },

    #[error("invalid size interval [{min}, {max}]")]
    InvertedInterval { min: f64, max: f64 },

    #[error("scale must be positive, got {0}")]
    NonPositiveScale(f64),

    #[error("invalid injection config: {0}")]
    InvalidConfig(String),

    #[error("degenerate ground truth: {0}")]
    DegenerateGroundTruth(&'static str),

    #[error("threshold list is empty")]
    EmptyThresholds,

    #[error("threshold {0} outside (0, 1)")]
    InvalidThreshold(f64),

    #[error("malformed PFM: {0}")]
    Pfm(String),

    #[error("non-finite value at index {0}")]
    NonFinite(usize),

    #[error("{path}: {reason}")]
    Dataset { path: PathBuf, reason: String },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: {source}")]
    Image {
        path: PathBuf,
        #[source]
        source: image::ImageError,
    },

    #[error("{path}: {source}")]
    Json {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },
}

impl Error {
    /// Short machine-readable name of the variant.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::InvalidRig(_) => "invalid_rig",
            Error::AboveHorizon { .. } => "above_horizon",
            Error::OutOfBounds { .. } => "out_of_bounds",
            Error::NonPositiveDepth(_) => "non_positive_depth",
            Error::EmptyRoadMask => "empty_road_mask",
            Error::DimMismatch { .. } => "dim_mismatch",
            Error::InvertedInterval { .. } => "inverted_interval",
            Error::NonPositiveScale(_) => "non_positive_scale",
            Error::InvalidConfig(_) => "invalid_config",
            Error::DegenerateGroundTruth(_) => "degenerate_ground_truth",
            Error::EmptyThresholds => "empty_thresholds",
            Error::InvalidThreshold(_) => "invalid_threshold",
            Error::Pfm(_) => "pfm",
            Error::NonFinite(_) => "non_finite",
            Error::Dataset { .. } => "dataset",
            Error::Io { .. } => "io",
            Error::Image { .. } => "image",
            Error::Json { .. } => "json",
        }
    }

    pub(crate) fn dataset(path: impl Into<PathBuf>, reason: impl Into<String>) -> Self {
        Error::Dataset {
            path: path.into(),
            reason: reason.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
