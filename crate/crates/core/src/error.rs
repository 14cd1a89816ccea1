use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("empty signal")]
    EmptySignal,

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("sample rate mismatch: {left} Hz vs {right} Hz")]
    SampleRateMismatch { left: u32, right: u32 },

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("durations differ by more than {tolerance_pct}%: {left} vs {right} samples")]
    DurationMismatch {
        left: usize,
        right: usize,
        tolerance_pct: f64,
    },

    #[error("signal has zero energy: {0}")]
    ZeroEnergy(&'static str),

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("position {0} is not strictly inside the room")]
    OutsideRoom(&'static str),

    #[error("source and microphone coincide")]
    CoincidentPositions,

    #[error("infeasible placement: {0}")]
    InfeasiblePlacement(String),

    #[error("energy decay never reaches {needed_db} dB (minimum {reached_db:.1} dB)")]
    InsufficientDecay { needed_db: f64, reached_db: f64 },

    #[error("input too short: need at least {needed} frames, got {actual}")]
    TooShort { needed: usize, actual: usize },

    #[error("external codec failed: {0}")]
    ExternalCodec(String),

    #[error("no candidate RIR could be simulated: {0}")]
    NoCandidates(String),

    #[error("non-finite loss at step {step} (batch {batch})")]
    NonFiniteLoss { step: usize, batch: usize },

    #[error("unsupported audio format: {0}")]
    UnsupportedFormat(String),

    #[error("malformed {kind} file: {reason}")]
    Malformed { kind: &'static str, reason: String },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Wav(#[from] hound::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidParameter(msg.into())
    }

    /// Short machine-readable tag, used by the CLI error line.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::EmptySignal => "empty_signal",
            Error::InvalidParameter(_) => "invalid_parameter",
            Error::SampleRateMismatch { .. } => "sample_rate_mismatch",
            Error::DimensionMismatch { .. } => "dimension_mismatch",
            Error::DurationMismatch { .. } => "duration_mismatch",
            Error::ZeroEnergy(_) => "zero_energy",
            Error::NonFinite(_) => "non_finite",
            Error::OutsideRoom(_) => "outside_room",
            Error::CoincidentPositions => "coincident_positions",
            Error::InfeasiblePlacement(_) => "infeasible_placement",
            Error::InsufficientDecay { .. } => "insufficient_decay",
            Error::TooShort { .. } => "too_short",
            Error::ExternalCodec(_) => "external_codec",
            Error::NoCandidates(_) => "no_candidates",
            Error::NonFiniteLoss { .. } => "non_finite_loss",
            Error::UnsupportedFormat(_) => "unsupported_format",
            Error::Malformed { .. } => "malformed_file",
            Error::Io { .. } => "io",
            Error::Wav(_) => "wav",
            Error::Json(_) => "json",
        }
    }
}
