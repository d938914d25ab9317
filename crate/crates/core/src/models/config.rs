use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::dsp::{ACOUSTIC_DIM, MEL_DIM};
use crate::error::{Error, Result};
use crate::ppg::TOY_PPG_DIM;

/// Baseline input `[L | f0 | vuv]`; proposed input `[L | f0 | vuv | P]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "lowercase"))]
pub enum Mode {
    Baseline,
    Proposed,
}

impl Mode {
    pub fn as_str(self) -> &'static str {
        match self {
            Mode::Baseline => "baseline",
            Mode::Proposed => "proposed",
        }
    }
}

impl core::str::FromStr for Mode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "baseline" => Ok(Mode::Baseline),
            "proposed" => Ok(Mode::Proposed),
            other => Err(Error::InvalidConfig(format!("unknown mode {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default, deny_unknown_fields))]
pub struct RefEncoderConfig {
    pub conv_filters: Vec<usize>,
    pub embedding_dim: usize,
    /// Per-utterance channel normalisation after every convolution.
    pub channel_norm: bool,
}

impl Default for RefEncoderConfig {
    fn default() -> Self {
        Self { conv_filters: vec![32, 32, 64, 64, 128, 128], embedding_dim: 1, channel_norm: false }
    }
}

impl RefEncoderConfig {
    /// Frequency bins left after the stride-2 stack, ceil division per layer.
    pub fn output_freq(&self, mel_dim: usize) -> usize {
        self.conv_filters.iter().fold(mel_dim, |f, _| f.div_ceil(2))
    }

    /// Width of the flattened conv output fed to the GRU.
    pub fn gru_input_dim(&self, mel_dim: usize) -> usize {
        self.output_freq(mel_dim) * self.conv_filters.last().copied().unwrap_or(1)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default, deny_unknown_fields))]
pub struct CbhgConfig {
    pub bank_k: usize,
    pub bank_filters: usize,
    pub projection_dim: usize,
    pub highway_layers: usize,
    pub highway_units: usize,
    pub gru_units: usize,
    pub output_dim: usize,
}

impl Default for CbhgConfig {
    fn default() -> Self {
        Self {
            bank_k: 16,
            bank_filters: 128,
            projection_dim: 128,
            highway_layers: 4,
            highway_units: 64,
            gru_units: 64,
            output_dim: ACOUSTIC_DIM,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default, deny_unknown_fields))]
pub struct ModelConfig {
    pub mode: Mode,
    pub ppg_dim: usize,
    pub mel_dim: usize,
    pub ref_encoder: RefEncoderConfig,
    pub cbhg: CbhgConfig,
    pub seed: u64,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            mode: Mode::Proposed,
            ppg_dim: TOY_PPG_DIM,
            mel_dim: MEL_DIM,
            ref_encoder: RefEncoderConfig::default(),
            cbhg: CbhgConfig::default(),
            seed: 0,
        }
    }
}

impl ModelConfig {
    pub fn prosody_dim(&self) -> usize {
        match self.mode {
            Mode::Baseline => 0,
            Mode::Proposed => self.ref_encoder.embedding_dim,
        }
    }

    /// `D_p + 2` or `D_p + D_e + 2`.
    pub fn input_dim(&self) -> usize {
        self.ppg_dim + 2 + self.prosody_dim()
    }

    pub fn validate(&self) -> Result<()> {
        let c = &self.cbhg;
        let sizes = [self.ppg_dim, self.mel_dim, c.bank_k, c.bank_filters, c.projection_dim, c.highway_units, c.gru_units];
        if sizes.contains(&0) {
            return Err(Error::InvalidConfig("model sizes must be positive".into()));
        }
        if c.output_dim != ACOUSTIC_DIM {
            return Err(Error::InvalidConfig(format!("output_dim must be {ACOUSTIC_DIM}")));
        }
        let r = &self.ref_encoder;
        if self.mode == Mode::Proposed && (r.embedding_dim == 0 || r.conv_filters.is_empty() || r.conv_filters.contains(&0)) {
            return Err(Error::InvalidConfig("reference encoder needs conv layers and a positive embedding size".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default, deny_unknown_fields))]
pub struct TrainConfig {
    pub learning_rate: f32,
    pub batch_size: usize,
    pub max_steps: u64,
    pub grad_clip_norm: f32,
    pub seed: u64,
    pub log_every: u64,
    pub checkpoint_every: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 1e-3,
            batch_size: 32,
            max_steps: 20_000,
            grad_clip_norm: 1.0,
            seed: 0,
            log_every: 100,
            checkpoint_every: 1000,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0) || !(self.grad_clip_norm > 0.0) || self.batch_size == 0 || self.max_steps == 0 {
            return Err(Error::InvalidConfig(
                "learning_rate, grad_clip_norm, batch_size and max_steps must be positive".into(),
            ));
        }
        Ok(())
    }
}
