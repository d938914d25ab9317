use alloc::string::String;

use thiserror::Error;

/// Errors raised by the analysis, modelling and synthesis code.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("signal too short: {len} samples, need at least {min}")]
    SignalTooShort { len: usize, min: usize },

    #[error("frame count mismatch: {what} has {got} frames, expected {expected}")]
    FrameMismatch { what: &'static str, expected: usize, got: usize },

    #[error("dimension mismatch in {what}: expected {expected}, got {got}")]
    DimMismatch { what: &'static str, expected: usize, got: usize },

    #[error("zero-lag autocorrelation must be positive, got {0}")]
    NonPositiveEnergy(f64),

    #[error("unstable predictor: reflection coefficient {index} has magnitude {magnitude}")]
    UnstableReflection { index: usize, magnitude: f64 },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("speed factor {factor} outside [{min}, {max}]")]
    FactorOutOfRange { factor: f32, min: f32, max: f32 },

    #[error("duplicate factor {0}")]
    DuplicateFactor(f32),

    #[error("insufficient voiced frames: {got} < {min}")]
    InsufficientVoiced { got: usize, min: usize },

    #[error("zero variance in voiced log-f0")]
    ZeroVariance,

    #[error("posteriorgram row {row} is not on the simplex (sum {sum}, min {min})")]
    NotOnSimplex { row: usize, sum: f32, min: f32 },

    #[error("label {label} at frame {frame} out of range for {classes} classes")]
    LabelOutOfRange { frame: usize, label: u32, classes: usize },

    #[error("empty input: {0}")]
    Empty(&'static str),

    #[error("non-finite value in {what} at step {step}")]
    NonFinite { what: &'static str, step: u64 },

    #[error("configuration mismatch: {0}")]
    ConfigMismatch(String),

    #[error("out-of-order frame: got index {got}, expected {expected}")]
    OutOfOrder { expected: usize, got: usize },

    #[error("manifest line {line}: {msg}")]
    ManifestParse { line: usize, msg: String },

    #[error("duplicate utterance id {0:?}")]
    DuplicateId(String),
}

pub type Result<T> = core::result::Result<T, Error>;
