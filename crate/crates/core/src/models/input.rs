use crate::dsp::{PitchTrack, F0_MAX_HZ, F0_MIN_HZ};
use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::ppg::Ppg;

use super::config::Mode;

/// Network encoding of f0: `(ln f0 - ln 50) / (ln 600 - ln 50)` when voiced, 0 otherwise.
pub fn encode_f0(f0_hz: f64, voiced: bool) -> f32 {
    if !voiced || !(f0_hz > 0.0) {
        return 0.0;
    }
    let lo = libm::log(F0_MIN_HZ);
    ((libm::log(f0_hz) - lo) / (libm::log(F0_MAX_HZ) - lo)) as f32
}

/// `T x D_e` reference-encoder output. Values are GRU states, inside
/// `(-1, 1)` in exact arithmetic; f32 rounding may reach the endpoints.
#[derive(Debug, Clone, PartialEq)]
pub struct ProsodyEmbedding {
    values: Matrix,
}

impl ProsodyEmbedding {
    pub fn new(values: Matrix) -> Result<Self> {
        if let Some(i) = values.as_slice().iter().position(|v| !(v.abs() <= 1.0)) {
            return Err(Error::InvalidConfig(alloc::format!(
                "prosody value {} at {i} outside [-1, 1]",
                values.as_slice()[i]
            )));
        }
        Ok(Self { values })
    }

    pub fn frames(&self) -> usize {
        self.values.rows()
    }

    pub fn dim(&self) -> usize {
        self.values.cols()
    }

    pub fn values(&self) -> &Matrix {
        &self.values
    }
}

/// Column layout `[L | f0 | vuv | (P)]`.
#[derive(Debug, Clone, PartialEq)]
pub struct InputFeatureMatrix {
    values: Matrix,
    mode: Mode,
    ppg_dim: usize,
}

impl InputFeatureMatrix {
    pub fn values(&self) -> &Matrix {
        &self.values
    }

    pub fn into_matrix(self) -> Matrix {
        self.values
    }

    pub fn mode(&self) -> Mode {
        self.mode
    }

    pub fn frames(&self) -> usize {
        self.values.rows()
    }

    pub fn dim(&self) -> usize {
        self.values.cols()
    }

    pub fn f0_col(&self) -> usize {
        self.ppg_dim
    }

    pub fn vuv_col(&self) -> usize {
        self.ppg_dim + 1
    }

    pub fn prosody_cols(&self) -> core::ops::Range<usize> {
        self.ppg_dim + 2..self.values.cols()
    }
}

pub fn assemble_input(
    ppg: &Ppg,
    pitch: &PitchTrack,
    prosody: Option<&ProsodyEmbedding>,
    mode: Mode,
) -> Result<InputFeatureMatrix> {
    let t_len = ppg.frames();
    if pitch.frames() != t_len {
        return Err(Error::FrameMismatch { what: "pitch track", expected: t_len, got: pitch.frames() });
    }
    let pros_dim = match (mode, prosody) {
        (Mode::Baseline, None) => 0,
        (Mode::Proposed, Some(p)) => {
            if p.frames() != t_len {
                return Err(Error::FrameMismatch { what: "prosody embedding", expected: t_len, got: p.frames() });
            }
            p.dim()
        }
        (Mode::Proposed, None) => return Err(Error::ConfigMismatch("proposed mode needs a prosody embedding".into())),
        (Mode::Baseline, Some(_)) => {
            return Err(Error::ConfigMismatch("baseline mode takes no prosody embedding".into()))
        }
    };
    let d_p = ppg.dim();
    let mut values = Matrix::zeros(t_len, d_p + 2 + pros_dim);
    for t in 0..t_len {
        let row = values.row_mut(t);
        row[..d_p].copy_from_slice(ppg.values().row(t));
        row[d_p] = encode_f0(pitch.f0_hz[t], pitch.vuv[t]);
        row[d_p + 1] = if pitch.vuv[t] { 1.0 } else { 0.0 };
        if let Some(p) = prosody {
            row[d_p + 2..].copy_from_slice(p.values().row(t));
        }
    }
    Ok(InputFeatureMatrix { values, mode, ppg_dim: d_p })
}
