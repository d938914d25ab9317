use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::SeedableRng;

use crate::dsp::{AcousticFeatures, MelSpectrogram, PitchTrack};
use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::nn::{clip_grad_norm, grad_norm, zero_grad, Adam, AdamState, Rng};
use crate::ppg::Ppg;

use super::config::TrainConfig;
use super::conversion::{ConversionModel, ModelInputs};

/// One target-speaker utterance: conditioning plus ground-truth features.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainingExample {
    pub ppg: Ppg,
    pub pitch: PitchTrack,
    pub mel: MelSpectrogram,
    pub target: AcousticFeatures,
}

impl TrainingExample {
    pub fn new(ppg: Ppg, pitch: PitchTrack, mel: MelSpectrogram, target: AcousticFeatures) -> Result<Self> {
        let t = target.frames();
        ppg.expect_frames(t)?;
        if pitch.frames() != t {
            return Err(Error::FrameMismatch { what: "pitch track", expected: t, got: pitch.frames() });
        }
        if mel.frames() != t {
            return Err(Error::FrameMismatch { what: "mel spectrogram", expected: t, got: mel.frames() });
        }
        Ok(Self { ppg, pitch, mel, target })
    }

    pub fn inputs(&self) -> ModelInputs<'_> {
        ModelInputs { ppg: &self.ppg, pitch: &self.pitch, mel: Some(&self.mel) }
    }

    pub fn frames(&self) -> usize {
        self.target.frames()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepStats {
    pub step: u64,
    /// Mean absolute error of the batch before the update.
    pub loss: f32,
    pub grad_norm: f32,
    /// Global gradient norm after clipping.
    pub clipped_norm: f32,
}

/// Sum of `|pred - target|` and the matching subgradient scaled by `scale`.
fn l1(pred: &Matrix, target: &Matrix, scale: f32) -> (f64, Matrix) {
    let mut d = Matrix::zeros(pred.rows(), pred.cols());
    let mut sum = 0.0f64;
    for ((g, &p), &y) in d.as_mut_slice().iter_mut().zip(pred.as_slice()).zip(target.as_slice()) {
        let e = p - y;
        sum += f64::from(e.abs());
        *g = if e > 0.0 { scale } else if e < 0.0 { -scale } else { 0.0 };
    }
    (sum, d)
}

/// Mean per-element L1 error of `model` over `examples`.
pub fn reconstruction_loss(model: &ConversionModel, examples: &[TrainingExample]) -> Result<f32> {
    let mut sum = 0.0f64;
    let mut n = 0usize;
    for ex in examples {
        let (y, _) = model.forward_train(&ex.inputs())?;
        sum += l1(&y, ex.target.values(), 0.0).0;
        n += y.as_slice().len();
    }
    if n == 0 {
        return Err(Error::Empty("training examples"));
    }
    Ok((sum / n as f64) as f32)
}

/// Adam over shuffled minibatches of whole utterances, each run at its own
/// length; the loss is the mean over every frame and dimension in the batch.
#[derive(Debug, Clone)]
pub struct Trainer {
    model: ConversionModel,
    optimizer: Adam,
    config: TrainConfig,
    step: u64,
}

impl Trainer {
    pub fn new(model: ConversionModel, config: TrainConfig) -> Result<Self> {
        config.validate()?;
        Ok(Self { model, optimizer: Adam::new(config.learning_rate), config, step: 0 })
    }

    pub fn resume(model: ConversionModel, config: TrainConfig, state: AdamState, step: u64) -> Result<Self> {
        let mut t = Self::new(model, config)?;
        t.optimizer.set_state(state);
        t.step = step;
        Ok(t)
    }

    pub fn model(&self) -> &ConversionModel {
        &self.model
    }

    pub fn into_model(self) -> ConversionModel {
        self.model
    }

    pub fn optimizer_state(&self) -> &AdamState {
        self.optimizer.state()
    }

    pub fn step_count(&self) -> u64 {
        self.step
    }

    pub fn config(&self) -> &TrainConfig {
        &self.config
    }

    /// Utterance indices for the current step; depends only on the seed and step.
    pub fn batch_indices(&self, n: usize) -> Vec<usize> {
        let b = self.config.batch_size.min(n).max(1);
        let per_epoch = n.div_ceil(b) as u64;
        let epoch = self.step / per_epoch;
        let slot = (self.step % per_epoch) as usize;
        let mut order: Vec<usize> = (0..n).collect();
        let mut rng = Rng::seed_from_u64(self.config.seed.wrapping_mul(0x9e37_79b9_7f4a_7c15) ^ epoch);
        order.shuffle(&mut rng);
        order[slot * b..((slot + 1) * b).min(n)].to_vec()
    }

    pub fn step(&mut self, data: &[TrainingExample]) -> Result<StepStats> {
        if data.is_empty() {
            return Err(Error::Empty("training examples"));
        }
        let batch = self.batch_indices(data.len());
        let elements: usize = batch.iter().map(|&i| data[i].frames() * self.model.config().cbhg.output_dim).sum();
        let scale = 1.0 / elements.max(1) as f32;
        zero_grad(&mut self.model);
        let mut sum = 0.0f64;
        for &i in &batch {
            let ex = &data[i];
            let (y, cache) = self.model.forward_train(&ex.inputs())?;
            let (s, dy) = l1(&y, ex.target.values(), scale);
            sum += s;
            self.model.backward(&cache, &dy);
        }
        let loss = (sum * f64::from(scale)) as f32;
        if !loss.is_finite() {
            return Err(Error::NonFinite { what: "loss", step: self.step });
        }
        let norm = clip_grad_norm(&mut self.model, self.config.grad_clip_norm);
        if !norm.is_finite() {
            return Err(Error::NonFinite { what: "gradient norm", step: self.step });
        }
        let clipped_norm = grad_norm(&self.model);
        self.optimizer.step(&mut self.model)?;
        let stats = StepStats { step: self.step, loss, grad_norm: norm, clipped_norm };
        self.step += 1;
        Ok(stats)
    }

    /// Steps until `max_steps`, reporting every step to `on_step`.
    pub fn run(&mut self, data: &[TrainingExample], mut on_step: impl FnMut(&StepStats, &Self)) -> Result<()> {
        while self.step < self.config.max_steps {
            let s = self.step(data)?;
            on_step(&s, self);
        }
        Ok(())
    }
}
