use super::analysis::BFCC_DIM;
use super::pitch::{PitchTrack, F0_MIN_HZ};
use crate::error::{Error, Result};
use crate::matrix::Matrix;

pub const ACOUSTIC_DIM: usize = 32;
pub const PERIOD_COL: usize = 30;
pub const CORRELATION_COL: usize = 31;

/// `T x 32` vocoder features: 30 BFCCs, normalised pitch period, pitch
/// correlation.
#[derive(Debug, Clone, PartialEq)]
pub struct AcousticFeatures {
    values: Matrix,
}

impl AcousticFeatures {
    pub fn new(values: Matrix) -> Result<Self> {
        if values.cols() != ACOUSTIC_DIM {
            return Err(Error::DimMismatch { what: "acoustic features", expected: ACOUSTIC_DIM, got: values.cols() });
        }
        if !values.is_finite() {
            return Err(Error::NonFinite { what: "acoustic features", step: 0 });
        }
        Ok(Self { values })
    }

    pub fn frames(&self) -> usize {
        self.values.rows()
    }

    pub fn values(&self) -> &Matrix {
        &self.values
    }

    pub fn into_matrix(self) -> Matrix {
        self.values
    }

    pub fn bfcc(&self, t: usize) -> &[f32] {
        &self.values.row(t)[..BFCC_DIM]
    }

    pub fn period_norm(&self, t: usize) -> f32 {
        self.values.get(t, PERIOD_COL)
    }

    pub fn correlation(&self, t: usize) -> f32 {
        self.values.get(t, CORRELATION_COL)
    }
}

/// `period / (sample_rate / f0_min)` clipped to `[0, 1]`.
pub fn normalize_period(period_samples: f64, sample_rate: u32) -> f32 {
    (period_samples * F0_MIN_HZ / f64::from(sample_rate)).clamp(0.0, 1.0) as f32
}

pub fn denormalize_period(norm: f32, sample_rate: u32) -> f64 {
    f64::from(norm) * f64::from(sample_rate) / F0_MIN_HZ
}

/// Concatenates BFCCs with the normalised period and correlation columns.
/// Unvoiced frames get `(normalize_period(0), 0)`.
pub fn assemble_acoustic(bfcc: &Matrix, pitch: &PitchTrack) -> Result<AcousticFeatures> {
    if bfcc.cols() != BFCC_DIM {
        return Err(Error::DimMismatch { what: "bfcc", expected: BFCC_DIM, got: bfcc.cols() });
    }
    if bfcc.rows() != pitch.frames() {
        return Err(Error::FrameMismatch { what: "pitch track", expected: bfcc.rows(), got: pitch.frames() });
    }
    let values = Matrix::from_fn(bfcc.rows(), ACOUSTIC_DIM, |t, c| match c {
        PERIOD_COL if pitch.vuv[t] => normalize_period(pitch.period_samples[t], pitch.sample_rate),
        PERIOD_COL => normalize_period(0.0, pitch.sample_rate),
        CORRELATION_COL if pitch.vuv[t] => pitch.correlation[t] as f32,
        CORRELATION_COL => 0.0,
        _ => bfcc.get(t, c),
    });
    AcousticFeatures::new(values)
}
