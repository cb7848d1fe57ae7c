use std::path::PathBuf;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("shape mismatch in {op}: {dimension} expected {expected}, got {actual}")]
    Shape {
        op: &'static str,
        dimension: &'static str,
        expected: usize,
        actual: usize,
    },

    #[error("invalid argument to {op}: {reason}")]
    InvalidArgument { op: &'static str, reason: String },

    #[error("invalid model config: {0}")]
    InvalidConfig(String),

    #[error("unknown preset `{0}` (expected one of tasnet_base, convtasnet_base, simplified1, simplified2, tiny)")]
    UnknownPreset(String),

    #[error("unknown sharing scheme `{0}` (expected two letters from n/s/d/a)")]
    UnknownScheme(String),

    #[error("missing parameter `{0}`")]
    MissingParameter(String),

    #[error("backward: {0}")]
    Backward(String),

    #[error("input too short: {op} needs at least {required} samples, got {actual}")]
    TooShort {
        op: &'static str,
        required: usize,
        actual: usize,
    },

    #[error("reference signal has zero energy after mean removal")]
    ZeroReference,

    #[error("signal has zero power: {0}")]
    ZeroPower(&'static str),

    #[error("unsupported wav format in {path}: {observed}")]
    WavFormat { path: PathBuf, observed: String },

    #[error("no readable wav files in noise directory {0}")]
    EmptyNoiseDir(PathBuf),

    #[error("checkpoint: {0}")]
    Checkpoint(String),

    #[error("manifest: {0}")]
    Manifest(String),

    #[error("non-finite loss at step {step}; last good checkpoint: {last_checkpoint}")]
    NonFiniteLoss { step: usize, last_checkpoint: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Wav(#[from] hound::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Short stable identifier used in machine-readable error lines.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Shape { .. } => "shape",
            Error::InvalidArgument { .. } => "invalid_argument",
            Error::InvalidConfig(_) => "invalid_config",
            Error::UnknownPreset(_) => "unknown_preset",
            Error::UnknownScheme(_) => "unknown_scheme",
            Error::MissingParameter(_) => "missing_parameter",
            Error::Backward(_) => "backward",
            Error::TooShort { .. } => "too_short",
            Error::ZeroReference => "zero_reference",
            Error::ZeroPower(_) => "zero_power",
            Error::WavFormat { .. } => "wav_format",
            Error::EmptyNoiseDir(_) => "empty_noise_dir",
            Error::Checkpoint(_) => "checkpoint",
            Error::Manifest(_) => "manifest",
            Error::NonFiniteLoss { .. } => "non_finite_loss",
            Error::Io(_) => "io",
            Error::Wav(_) => "wav",
            Error::Csv(_) => "csv",
            Error::Json(_) => "json",
        }
    }
}

pub(crate) fn shape_err(
    op: &'static str,
    dimension: &'static str,
    expected: usize,
    actual: usize,
) -> Error {
    Error::Shape {
        op,
        dimension,
        expected,
        actual,
    }
}

pub(crate) fn invalid(op: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidArgument {
        op,
        reason: reason.into(),
    }
}
