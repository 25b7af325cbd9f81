use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid trace: {0}")]
    InvalidTrace(String),

    #[error("magnetometer readings required to align a device-frame trace")]
    MissingMagnetometer,

    #[error("cannot estimate gravity: mean accel norm {0:.3e} m/s^2 is too small")]
    DegenerateGravity(f64),

    #[error("window of {window} samples is longer than the trace ({len} samples)")]
    WindowTooLong { window: usize, len: usize },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("series too short: need at least {need} samples, got {got}")]
    SeriesTooShort { need: usize, got: usize },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("insufficient training data: {0}")]
    InsufficientData(String),

    #[error("empty trip")]
    EmptyTrip,

    #[error("model kind {0} does not support this operation")]
    UnsupportedModel(&'static str),

    #[error("infeasible route segment: {0}")]
    InfeasibleSegment(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}
