use std::path::PathBuf;

use thiserror::Error;

/// Errors produced anywhere in the gait speed pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("empty file: {0}")]
    EmptyFile(PathBuf),

    #[error("malformed row at line {line}: {reason}")]
    MalformedRow { line: u64, reason: String },

    #[error("timestamps not strictly increasing at line {line}")]
    NonMonotonicTime { line: u64 },

    #[error("invalid session: {0}")]
    InvalidSession(String),

    #[error("calibration matrix for {0} is singular")]
    SingularMatrix(&'static str),

    #[error("session too short: {samples} samples cannot lose {trim} from each end")]
    TooShort { samples: usize, trim: usize },

    #[error("stream of {len} samples is shorter than one frame of {frame}")]
    StreamTooShort { len: usize, frame: usize },

    #[error("invalid overlap {0}; must lie in [0, 1)")]
    InvalidOverlap(f64),

    #[error("no sessions to segment")]
    NoSessions,

    #[error("sessions have mixed sample rates ({0} Hz vs {1} Hz)")]
    MixedSampleRates(f64, f64),

    #[error("no dominant spectral peak in band")]
    NoDominantPeak,

    #[error("shape mismatch: expected {expected}, got {got}")]
    ShapeMismatch { expected: String, got: String },

    #[error("length mismatch: {0} vs {1}")]
    LengthMismatch(usize, usize),

    #[error("empty input")]
    Empty,

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("{field} = {value} is out of range [{min}, {max}]")]
    OutOfRange {
        field: &'static str,
        value: f64,
        min: f64,
        max: f64,
    },

    #[error("non-finite loss at epoch {0}")]
    NonFiniteLoss(usize),

    #[error("truth values must be positive, found {0}")]
    NonPositiveTruth(f64),

    #[error("truth has zero variance")]
    DegenerateTruth,

    #[error("need at least 2 participants, found {0}")]
    TooFewParticipants(usize),

    #[error("bad magic: expected {expected:?}, found {found:?}")]
    BadMagic { expected: [u8; 4], found: [u8; 4] },

    #[error("unsupported format version {0}")]
    VersionMismatch(u32),

    #[error("truncated file")]
    Truncated,

    #[error("manifest not found: {0}")]
    ManifestNotFound(PathBuf),

    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),

    #[error("CSV error: {0}")]
    Csv(#[from] csv::Error),

    #[error("JSON error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
