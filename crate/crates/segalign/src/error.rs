use thiserror::Error;

/// Crate-wide error type.
#[derive(Error, Debug)]
pub enum SegalignError {
    #[error("transcript list is empty")]
    EmptyTranscripts,
    #[error("transcript `{0}` has no actions")]
    EmptyTranscript(String),
    #[error("alignment for `{video}` is not monotone at frame {frame}")]
    NonMonotoneAlignment { video: String, frame: usize },
    #[error("feature dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("video `{video}`: {frames} frames cannot fit {states} states of its shortest grammar path")]
    Infeasible {
        video: String,
        frames: usize,
        states: usize,
    },
    #[error("all observation scores at frame {frame} are -inf")]
    DeadColumn { frame: usize },
    #[error("no finite-cost annotation assignment; offending labels: {0:?}")]
    UnassignableLabels(Vec<usize>),
    #[error("boundary adjustment would shrink segment {segment} below {min} frames")]
    AdjustmentInfeasible { segment: usize, min: usize },
    #[error("instance too large for exhaustive decoding: T={frames}, states={states}")]
    OracleTooLarge { frames: usize, states: usize },
    #[error("mean state length must be positive, got {0}")]
    NonPositiveLength(f64),
    #[error("video `{video}` is shorter ({frames} frames) than its transcript ({actions} actions)")]
    VideoTooShort {
        video: String,
        frames: usize,
        actions: usize,
    },
    #[error("alignment length mismatch for `{video}`: {left} vs {right}")]
    LengthMismatch {
        video: String,
        left: usize,
        right: usize,
    },
    #[error("transcript mismatch between prediction and ground truth for `{video}`")]
    TranscriptMismatch { video: String },
    #[error("unknown label `{0}`")]
    UnknownLabel(String),
    #[error("missing {what} for video `{video}`")]
    MissingData { what: &'static str, video: String },
    #[error("parse error in {path} at line {line}: {msg}")]
    Parse {
        path: String,
        line: usize,
        msg: String,
    },
    #[error("malformed feature file {path} at byte {offset}: {msg}")]
    MalformedFeatureFile {
        path: String,
        offset: u64,
        msg: String,
    },
    #[error("invalid synthetic spec: {0}")]
    InvalidSpec(String),
    #[error("invalid config: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, SegalignError>;
