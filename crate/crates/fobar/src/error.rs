//! Crate-wide error type.

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("no samples to aggregate (upstream sampling produced nothing)")]
    EmptySamples,

    #[error("aligned lists differ in length: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },

    #[error("all combined scores are zero; nothing to normalize")]
    DegenerateCombination,

    #[error("prediction references candidate {index} but only {count} candidates exist")]
    UnknownCandidate { index: usize, count: usize },

    #[error("prediction references mask {index} but only {count} masks exist")]
    UnknownMask { index: usize, count: usize },

    #[error("alpha must lie in [0, 1], got {0}")]
    InvalidAlpha(f64),

    #[error("epsilon must be positive, got {0}")]
    InvalidEpsilon(f64),

    #[error("not a number: {0:?}")]
    BadNumber(String),

    #[error("invalid answer value: {0}")]
    BadAnswer(String),

    #[error("invalid question {id:?}: {reason}")]
    BadQuestion { id: String, reason: String },

    #[error("prompt pack {name:?}: {reason}")]
    BadPromptPack { name: String, reason: String },

    #[error(
        "cache miss for model {model_id:?}, sample {sample_index} (digest {digest}); \
         no live backend configured to fetch it"
    )]
    CacheMiss {
        model_id: String,
        sample_index: usize,
        digest: String,
    },

    #[error("backend {backend_id:?}: {message}")]
    Backend { backend_id: String, message: String },

    #[error("backend unreachable: {0}")]
    Unreachable(String),

    #[error(
        "m_b={requested} exceeds the {available} cached backward samples \
         (question {question:?}, candidate {candidate}, mask {mask})"
    )]
    MbShortfall {
        requested: usize,
        available: usize,
        question: String,
        candidate: usize,
        mask: usize,
    },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),

    #[error("malformed record: {0}")]
    Serde(#[from] serde_json::Error),
}
