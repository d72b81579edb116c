use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("slide is {width}x{height} px; both axes must be at least {min} px")]
    DimensionTooSmall { width: u32, height: u32, min: u32 },

    #[error("histogram has no mass")]
    EmptyHistogram,

    #[error("synthetic slide spec is infeasible: {0}")]
    SpecInfeasible(String),

    #[error("tile ({x}, {y}) at level {level} is out of range")]
    TileOutOfRange { level: usize, x: u32, y: u32 },

    #[error("unknown {kind} `{name}` (available: {available})")]
    UnknownStrategy {
        kind: &'static str,
        name: String,
        available: String,
    },

    #[error("patch buffer has {actual} bytes, expected {expected}")]
    WrongPatchShape { expected: usize, actual: usize },

    #[error("bad magic bytes in feature file")]
    BadMagic,

    #[error("unsupported feature file version {0}")]
    UnsupportedVersion(u16),

    #[error("feature file truncated: expected {expected} bytes, found {actual}")]
    TruncatedFile { expected: u64, actual: u64 },

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("need at least {needed} samples, got {got}")]
    TooFewSamples { needed: usize, got: usize },

    #[error("value {0} is outside the domain [0, 1]")]
    OutOfDomain(f64),

    #[error("misaligned arrays: {0}")]
    Misaligned(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("score list is empty")]
    EmptyScores,

    #[error("box covers no tissue patches")]
    EmptyBox,

    #[error("negative set is empty")]
    EmptyNegativeSet,

    #[error("{0} pool is empty")]
    EmptyPool(&'static str),

    #[error("box {0} is outside the patch grid")]
    InvalidBounds(String),

    #[error("slide has no physical scale")]
    MissingScale,

    #[error("malformed slide store at {path}: {reason}")]
    MalformedStore { path: PathBuf, reason: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Image(#[from] image::ImageError),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
