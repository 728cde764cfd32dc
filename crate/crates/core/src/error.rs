use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// Attach `path` to an I/O error.
pub fn file_error(path: &std::path::Path) -> impl FnOnce(std::io::Error) -> Error + '_ {
    move |source| Error::File {
        path: path.to_path_buf(),
        source,
    }
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("device level {0} is outside 1..=5")]
    InvalidLevel(i64),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("integration produced a non-finite node voltage at t = {t:e} s")]
    NonFiniteState { t: f64 },

    #[error("device switched more than {limit} times inside one step at t = {t:e} s")]
    SwitchingChatter { t: f64, limit: usize },

    #[error("device has jitter_sigma > 0 but no rng seed was given")]
    MissingSeed,

    #[error("observation window of {duration:e} s is too short (settle time {settle:e} s)")]
    WindowTooShort { settle: f64, duration: f64 },

    #[error("response is neither un-firing, oscillating nor firing in the steady window")]
    Ambiguous,

    #[error("device never switched during the sweep (v_max = {v_max} V)")]
    NoSwitch { v_max: f64 },

    #[error("run has zero cycles")]
    EmptyRun,

    #[error("phase diagram does not contain all three regions")]
    NoTriplePoint,

    #[error("circuit never oscillates for device level {level}")]
    NoOscillatingBand { level: u8 },

    #[error("shape mismatch: expected {expected}, got {got}")]
    ShapeMismatch { expected: usize, got: usize },

    #[error("loss became non-finite in epoch {epoch}")]
    DivergedLoss { epoch: usize },

    #[error("{path}: bad magic number {found:#010x}, expected {expected:#010x}")]
    BadMagic {
        path: PathBuf,
        expected: u32,
        found: u32,
    },

    #[error("{path}: file truncated (needed {needed} bytes, found {found})")]
    TruncatedFile {
        path: PathBuf,
        needed: usize,
        found: usize,
    },

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("{path}: label {label} at index {index} is outside 0..=9")]
    LabelOutOfRange {
        path: PathBuf,
        index: usize,
        label: u8,
    },

    #[error("nothing to plot")]
    EmptyData,

    #[error("config: {0}")]
    Config(String),

    #[error("unsupported network file: {0}")]
    NetworkFormat(String),

    #[error("{path}: {source}")]
    File {
        path: PathBuf,
        source: std::io::Error,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
