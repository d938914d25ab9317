use rand::SeedableRng;

use crate::dsp::{AcousticFeatures, MelSpectrogram, PitchTrack};
use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::nn::{visit_child, visit_child_mut, Module, Param, Rng};
use crate::ppg::Ppg;

use super::cbhg::{Cbhg, CbhgCache};
use super::config::{Mode, ModelConfig};
use super::input::{assemble_input, InputFeatureMatrix, ProsodyEmbedding};
use super::ref_encoder::{ReferenceEncoder, ReferenceEncoderCache};

/// Per-utterance conditioning. `mel` feeds the reference encoder and is
/// required in proposed mode.
#[derive(Debug, Clone, Copy)]
pub struct ModelInputs<'a> {
    pub ppg: &'a Ppg,
    pub pitch: &'a PitchTrack,
    pub mel: Option<&'a MelSpectrogram>,
}

/// CBHG conversion network, plus the reference encoder in proposed mode.
#[derive(Debug, Clone, PartialEq)]
pub struct ConversionModel {
    config: ModelConfig,
    ref_encoder: Option<ReferenceEncoder>,
    cbhg: Cbhg,
}

#[derive(Debug, Clone)]
pub struct ConversionCache {
    reference: Option<ReferenceEncoderCache>,
    cbhg: CbhgCache,
    prosody_cols: core::ops::Range<usize>,
}

/// Stream offset separating reference-encoder initialisation from the CBHG's.
const REF_ENCODER_STREAM: u64 = 0x7265_6665_6e63_6f64;

impl ConversionModel {
    pub fn new(config: ModelConfig) -> Result<Self> {
        config.validate()?;
        let mut rng = Rng::seed_from_u64(config.seed);
        let cbhg = Cbhg::new(&config.cbhg, config.input_dim(), &mut rng);
        let ref_encoder = (config.mode == Mode::Proposed).then(|| {
            let mut rng = Rng::seed_from_u64(config.seed ^ REF_ENCODER_STREAM);
            ReferenceEncoder::new(&config.ref_encoder, config.mel_dim, &mut rng)
        });
        Ok(Self { config, ref_encoder, cbhg })
    }

    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    pub fn mode(&self) -> Mode {
        self.config.mode
    }

    pub fn expect_mode(&self, mode: Mode) -> Result<()> {
        if mode != self.config.mode {
            return Err(Error::ConfigMismatch(alloc::format!(
                "model was built for {} mode, {} requested",
                self.config.mode.as_str(),
                mode.as_str()
            )));
        }
        Ok(())
    }

    pub fn reference_encode(&self, mel: &MelSpectrogram) -> Result<ProsodyEmbedding> {
        let enc = self.ref_encoder.as_ref().ok_or_else(|| {
            Error::ConfigMismatch("baseline model has no reference encoder".into())
        })?;
        enc.encode(mel.values())
    }

    fn check(&self, inputs: &ModelInputs<'_>) -> Result<()> {
        if inputs.ppg.dim() != self.config.ppg_dim {
            return Err(Error::DimMismatch { what: "ppg classes", expected: self.config.ppg_dim, got: inputs.ppg.dim() });
        }
        if let Some(mel) = inputs.mel {
            inputs.ppg.expect_frames(mel.frames())?;
        }
        Ok(())
    }

    pub fn assemble(&self, inputs: &ModelInputs<'_>) -> Result<InputFeatureMatrix> {
        self.check(inputs)?;
        let prosody = match self.config.mode {
            Mode::Baseline => None,
            Mode::Proposed => {
                let mel = inputs.mel.ok_or(Error::ConfigMismatch("proposed mode needs a mel spectrogram".into()))?;
                Some(self.reference_encode(mel)?)
            }
        };
        assemble_input(inputs.ppg, inputs.pitch, prosody.as_ref(), self.config.mode)
    }

    /// Predicted `T x 32` acoustic features.
    pub fn forward(&self, inputs: &ModelInputs<'_>) -> Result<AcousticFeatures> {
        let (y, _) = self.forward_train(inputs)?;
        if !y.is_finite() {
            return Err(Error::NonFinite { what: "model output", step: 0 });
        }
        AcousticFeatures::new(y)
    }

    pub fn forward_train(&self, inputs: &ModelInputs<'_>) -> Result<(Matrix, ConversionCache)> {
        self.check(inputs)?;
        let (prosody, reference) = match (&self.ref_encoder, self.config.mode) {
            (Some(enc), Mode::Proposed) => {
                let mel = inputs.mel.ok_or(Error::ConfigMismatch("proposed mode needs a mel spectrogram".into()))?;
                let (p, c) = enc.forward(mel.values())?;
                (Some(ProsodyEmbedding::new(p)?), Some(c))
            }
            _ => (None, None),
        };
        let input = assemble_input(inputs.ppg, inputs.pitch, prosody.as_ref(), self.config.mode)?;
        let prosody_cols = input.prosody_cols();
        let (y, cbhg) = self.cbhg.forward(input.values())?;
        Ok((y, ConversionCache { reference, cbhg, prosody_cols }))
    }

    pub fn backward(&mut self, cache: &ConversionCache, dy: &Matrix) {
        let need_dx = cache.reference.is_some();
        let dx = self.cbhg.backward(&cache.cbhg, dy, need_dx);
        if let (Some(enc), Some(rc), Some(dx)) = (self.ref_encoder.as_mut(), cache.reference.as_ref(), dx) {
            let dp = dx.columns(cache.prosody_cols.start, cache.prosody_cols.end);
            enc.backward(rc, &dp);
        }
    }
}

impl Module for ConversionModel {
    fn visit(&self, f: &mut dyn FnMut(&str, &Param)) {
        if let Some(enc) = &self.ref_encoder {
            visit_child("ref", enc, f);
        }
        visit_child("cbhg", &self.cbhg, f);
    }

    fn visit_mut(&mut self, f: &mut dyn FnMut(&str, &mut Param)) {
        if let Some(enc) = &mut self.ref_encoder {
            visit_child_mut("ref", enc, f);
        }
        visit_child_mut("cbhg", &mut self.cbhg, f);
    }
}
