use std::path::PathBuf;

pub type Result<T, E = ServiceError> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum ServiceError {
    #[error(transparent)]
    Core(#[from] impetus_core::Error),
    #[error("a session needs at least one slide")]
    EmptySlideList,
    #[error("cannot load slide at {path}: {source}")]
    SlideLoad {
        path: PathBuf,
        source: impetus_core::Error,
    },
    #[error("slide {slide} has {actual}-dimensional features but the session uses {expected}")]
    FeatureDimension {
        slide: String,
        expected: usize,
        actual: usize,
    },
    #[error("duplicate slide id {0}")]
    DuplicateSlide(String),
    #[error("unknown session {0}")]
    UnknownSession(String),
    #[error("unknown slide {0}")]
    UnknownSlide(String),
    #[error("slide {0} is confirmed and no longer takes labels")]
    ConfirmedSlide(String),
    #[error("slide {0} is already confirmed")]
    AlreadyConfirmed(String),
    #[error("no model has been trained yet")]
    NoModelYet,
    #[error("slide {0} has no ground truth")]
    MissingTruth(String),
    #[error("bad request: {0}")]
    BadRequest(String),
    #[error("corrupt session log {path}: {reason}")]
    CorruptLog { path: PathBuf, reason: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}
