use std::io;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// Broad failure class, used by the CLI to pick an exit code.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    Config,
    Data,
    Runtime,
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("invalid time series: {0}")]
    InvalidSeries(String),
    #[error("input of length {len} is shorter than the required {needed} points")]
    TooShort { len: usize, needed: usize },
    #[error("series of length {len} is shorter than window length {window}")]
    SeriesTooShort { len: usize, window: usize },
    #[error("window [{start}, {start} + {window}) is outside a series of length {len}")]
    WindowOutOfRange { start: usize, window: usize, len: usize },
    #[error("shift ({dx}, {dy}) does not fit an image of edge {edge}")]
    ShiftTooLarge { dx: i64, dy: i64, edge: usize },
    #[error("crop edge {crop} must lie in 1..={edge}")]
    CropTooLarge { crop: usize, edge: usize },
    #[error("class `{0}` has no samples")]
    EmptyClass(String),
    #[error("fraction {0} must lie strictly between 0 and 1")]
    FractionOutOfRange(f64),
    #[error("shape mismatch: expected {expected}, got {got}")]
    ShapeMismatch { expected: String, got: String },
    #[error("dataset is empty")]
    EmptyDataset,
    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },
    #[error("class index {class} is out of range for {num_classes} classes")]
    InvalidClass { class: usize, num_classes: usize },
    #[error("confusion matrix holds no samples")]
    EmptyMatrix,
    #[error("training history is empty")]
    EmptyHistory,
    #[error("manifest: {0}")]
    Manifest(String),
    #[error("checkpoint: {0}")]
    Checkpoint(String),
    #[error("training: {0}")]
    Training(String),
    #[error("image codec: {0}")]
    Image(String),
    #[error("{context}: {source}")]
    Context {
        context: String,
        #[source]
        source: Box<Error>,
    },
    #[error(transparent)]
    Io(#[from] io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn context(self, context: impl Into<String>) -> Self {
        Error::Context {
            context: context.into(),
            source: Box::new(self),
        }
    }

    pub fn kind(&self) -> ErrorKind {
        match self {
            Error::InvalidConfig(_)
            | Error::FractionOutOfRange(_)
            | Error::ShiftTooLarge { .. }
            | Error::CropTooLarge { .. }
            | Error::Json(_) => ErrorKind::Config,
            Error::InvalidSeries(_)
            | Error::TooShort { .. }
            | Error::SeriesTooShort { .. }
            | Error::WindowOutOfRange { .. }
            | Error::EmptyClass(_)
            | Error::EmptyDataset
            | Error::LengthMismatch { .. }
            | Error::InvalidClass { .. }
            | Error::EmptyMatrix
            | Error::EmptyHistory
            | Error::Manifest(_) => ErrorKind::Data,
            Error::ShapeMismatch { .. }
            | Error::Checkpoint(_)
            | Error::Training(_)
            | Error::Image(_)
            | Error::Io(_) => ErrorKind::Runtime,
            Error::Context { source, .. } => source.kind(),
        }
    }
}
