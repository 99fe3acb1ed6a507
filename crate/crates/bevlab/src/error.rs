//! Error type shared by every module in the crate.

use thiserror::Error;

/// Crate-wide error enum.
#[derive(Debug, Error)]
pub enum BevError {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("length mismatch: {0}")]
    LengthMismatch(String),

    #[error("timestamp mismatch at index {index}: {a} vs {b}")]
    TimestampMismatch { index: usize, a: f64, b: f64 },

    #[error("invalid camera: {0}")]
    InvalidCamera(String),

    #[error("invalid pose: {0}")]
    InvalidPose(String),

    #[error("static map construction needs at least 2 clouds, got {0}")]
    InsufficientViews(usize),

    #[error("static map is empty")]
    EmptyStaticMap,

    #[error("point cloud has no class labels")]
    UnlabeledCloud,

    #[error("point cloud has no feature vectors")]
    MissingFeatures,

    #[error("validity mask selects no elements")]
    EmptyMask,

    #[error("correspondence set is empty")]
    EmptyCorrespondence,

    #[error("no patch has a positive partner; contrastive loss undefined")]
    DegenerateBatch,

    #[error("evaluation region contains no cells")]
    EmptyRegion,

    #[error("pose {x:.3},{y:.3} lies outside the scene extent {extent:.3}")]
    PoseOutsideScene { x: f64, y: f64, extent: f64 },

    #[error("loss is not finite at the evaluation point")]
    NonFiniteLoss,

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("empty input: {0}")]
    EmptyInput(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error("format error in {path}: {reason}")]
    Format { path: String, reason: String },

    #[error("validation failed: {0} problem(s) found")]
    Validation(usize),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, BevError>;
