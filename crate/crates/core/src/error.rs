use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = GtsError> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum GtsError {
    #[error("binarization threshold must be in [1, 255], got {0}")]
    InvalidThreshold(u8),
    #[error("silhouette has no foreground pixels")]
    EmptySilhouette,
    #[error("scaled silhouette width {width} exceeds the {limit}-pixel canvas")]
    AspectOverflow { width: usize, limit: usize },
    #[error("no complete gait cycle found ({maxima} local maxima)")]
    NoCycleFound { maxima: usize },
    #[error("gait cycle detection needs at least {needed} frames, got {got}")]
    TooFewFrames { needed: usize, got: usize },
    #[error("dimension mismatch: expected {expected:?}, got {got:?}")]
    DimensionMismatch {
        expected: (usize, usize),
        got: (usize, usize),
    },
    #[error("invalid split bounds: {0}")]
    InvalidBounds(String),
    #[error("invalid hypothesis: {0}")]
    InvalidHypothesis(String),
    #[error("invalid GA configuration: {0}")]
    InvalidConfig(String),
    #[error("insufficient tuning data: {0}")]
    InsufficientTuningData(String),
    #[error("degenerate data: {0}")]
    DegenerateData(String),
    #[error("within-class scatter is singular")]
    SingularScatter,
    #[error("model has not been fitted")]
    UnfittedModel,
    #[error("gallery is empty")]
    EmptyGallery,
    #[error("invalid classifier input: {0}")]
    InvalidInput(String),
    #[error("degenerate trajectory: horizontal travel {0:.2} px is too small for slopes")]
    DegenerateTrajectory(f64),
    #[error("view estimator training data lacks angle {0}")]
    MissingAngle(u16),
    #[error("unknown view angle {0}")]
    UnknownAngle(u16),
    #[error("malformed corpus name: {}", .0.display())]
    MalformedName(PathBuf),
    #[error("corpus at {} contains no sequences", .0.display())]
    EmptyCorpus(PathBuf),
    #[error("need at least {needed} subjects, corpus has {got}")]
    TooFewSubjects { needed: usize, got: usize },
    #[error("length mismatch: {0} predictions vs {1} truths")]
    LengthMismatch(usize, usize),
    #[error("empty input")]
    EmptyInput,
    #[error("malformed record: {0}")]
    Format(String),
    #[error("image error: {0}")]
    Image(#[from] image::ImageError),
    #[error("io error on {}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl GtsError {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        GtsError::Io {
            path: path.into(),
            source,
        }
    }
}
