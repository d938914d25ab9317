//! LPC synthesis from 32-dimensional acoustic features.
//!
//! Each frame's BFCC is turned into reflection coefficients and a gain.
//! Block `t` covers samples `[t*hop, (t+1)*hop)` and interpolates linearly
//! from frame `t` towards frame `t+1`, so a streaming synthesizer emits block
//! `t` once frame `t+1` (or the end of input) is known.
//!
//! Excitation is `sqrt(c)*pulse + sqrt(1-c)*noise` when the interpolated
//! pitch correlation `c` reaches the voicing threshold, noise otherwise. The
//! pulse train carries unit power per sample; noise is uniform with unit
//! variance. The excitation drives the all-pole lattice `gain / A(z)`.
//!
//! The streamed signal is not level-normalised (a stream cannot know its
//! global peak). [`synthesize`] peak-normalises the concatenated stream.

use alloc::vec;
use alloc::vec::Vec;

use rand::{Rng as _, SeedableRng};

use crate::dsp::{
    denormalize_period, AcousticFeatures, BfccToLpc, FrameSpec, LpcCoefficients, ACOUSTIC_DIM, BFCC_DIM,
    CORRELATION_COL, F0_MAX_HZ, F0_MIN_HZ, PERIOD_COL,
};
use crate::error::{Error, Result};
use crate::nn::Rng;
use crate::waveform::Waveform;

/// Glottal-like pulse: unit impulse through this 2-tap lowpass (unit energy).
pub const PULSE_TAPS: [f64; 2] = [0.96, 0.28];

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default, deny_unknown_fields))]
pub struct VocoderConfig {
    pub voicing_threshold: f32,
    pub peak: f32,
    pub seed: u64,
}

impl Default for VocoderConfig {
    fn default() -> Self {
        Self { voicing_threshold: 0.3, peak: 0.89, seed: 0 }
    }
}

#[derive(Debug, Clone, PartialEq)]
struct FrameParams {
    lpc: LpcCoefficients,
    period: f64,
    correlation: f64,
}

/// Synthesis state carried across blocks.
#[derive(Debug, Clone, PartialEq)]
pub struct SynthFrameState {
    /// Coefficients of the frame that opened the most recent block.
    pub lpc: LpcCoefficients,
    /// Samples since the last pulse.
    pub pulse_phase: f64,
    /// Lattice backward-path memory, one value per stage.
    pub memory: Vec<f64>,
}

/// Frame-by-frame synthesizer with one frame of lookahead.
#[derive(Debug, Clone)]
pub struct StreamSynthesizer {
    config: VocoderConfig,
    converter: BfccToLpc,
    sample_rate: u32,
    hop: usize,
    next_index: usize,
    pending: Option<FrameParams>,
    state: SynthFrameState,
    pulse_prev: f64,
    rng: Rng,
}

impl StreamSynthesizer {
    pub fn new(spec: FrameSpec, config: VocoderConfig) -> Result<Self> {
        spec.validate()?;
        let converter = BfccToLpc::new(spec)?;
        let order = converter.order();
        Ok(Self {
            config,
            converter,
            sample_rate: spec.sample_rate,
            hop: spec.hop(),
            next_index: 0,
            pending: None,
            state: SynthFrameState {
                lpc: LpcCoefficients { coeffs: vec![0.0; order], reflection: vec![0.0; order], gain: 0.0 },
                pulse_phase: 0.0,
                memory: vec![0.0; order],
            },
            pulse_prev: 0.0,
            rng: Rng::seed_from_u64(config.seed),
        })
    }

    pub fn hop(&self) -> usize {
        self.hop
    }

    pub fn state(&self) -> &SynthFrameState {
        &self.state
    }

    /// Frames accepted so far.
    pub fn frames_pushed(&self) -> usize {
        self.next_index
    }

    fn params(&self, frame: &[f32]) -> Result<FrameParams> {
        if frame.len() != ACOUSTIC_DIM {
            return Err(Error::DimMismatch { what: "acoustic frame", expected: ACOUSTIC_DIM, got: frame.len() });
        }
        if frame.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite { what: "acoustic frame", step: self.next_index as u64 });
        }
        let lpc = self.converter.convert(&frame[..BFCC_DIM])?;
        let sr = f64::from(self.sample_rate);
        let raw = denormalize_period(frame[PERIOD_COL], self.sample_rate);
        let period = if raw > 0.0 { raw.clamp(sr / F0_MAX_HZ, sr / F0_MIN_HZ) } else { 0.0 };
        let correlation = f64::from(frame[CORRELATION_COL]).clamp(0.0, 1.0);
        Ok(FrameParams { lpc, period, correlation })
    }

    /// Accepts frame `index`; returns the block of the previous frame, if any.
    pub fn push(&mut self, index: usize, frame: &[f32]) -> Result<Option<Vec<f32>>> {
        if index != self.next_index {
            return Err(Error::OutOfOrder { expected: self.next_index, got: index });
        }
        let params = self.params(frame)?;
        self.next_index += 1;
        let block = match self.pending.take() {
            Some(prev) => {
                let b = self.render(&prev, &params);
                Some(b)
            }
            None => None,
        };
        self.pending = Some(params);
        Ok(block)
    }

    /// Emits the final block, holding the last frame constant.
    pub fn finish(&mut self) -> Option<Vec<f32>> {
        let last = self.pending.take()?;
        Some(self.render(&last, &last))
    }

    fn render(&mut self, a: &FrameParams, b: &FrameParams) -> Vec<f32> {
        let order = self.state.memory.len();
        let threshold = f64::from(self.config.voicing_threshold);
        let mut k = vec![0.0; order];
        let mut out = Vec::with_capacity(self.hop);
        for j in 0..self.hop {
            let u = j as f64 / self.hop as f64;
            let lerp = |x: f64, y: f64| x + (y - x) * u;
            for (i, ki) in k.iter_mut().enumerate() {
                *ki = lerp(a.lpc.reflection[i], b.lpc.reflection[i]);
            }
            let gain = lerp(a.lpc.gain, b.lpc.gain);
            let c = lerp(a.correlation, b.correlation);
            let period = match (a.period > 0.0, b.period > 0.0) {
                (true, true) => lerp(a.period, b.period),
                (true, false) => a.period,
                (false, true) => b.period,
                (false, false) => 0.0,
            };

            let noise = self.rng.gen_range(-1.0..1.0) * libm::sqrt(3.0);
            self.state.pulse_phase += 1.0;
            let mut impulse = 0.0;
            let voiced = c >= threshold && period > 0.0;
            if voiced && self.state.pulse_phase >= period {
                self.state.pulse_phase -= period;
                if self.state.pulse_phase >= period {
                    self.state.pulse_phase = 0.0;
                }
                impulse = libm::sqrt(period);
            }
            let pulse = PULSE_TAPS[0] * impulse + PULSE_TAPS[1] * self.pulse_prev;
            self.pulse_prev = impulse;
            let excitation = if voiced { libm::sqrt(c) * pulse + libm::sqrt(1.0 - c) * noise } else { noise };

            out.push(lattice_step(&k, &mut self.state.memory, gain * excitation) as f32);
        }
        self.state.lpc = a.lpc.clone();
        out
    }
}

/// One sample of the all-pole lattice `1 / A(z)` for reflection
/// coefficients `k` (predictor convention); `memory` holds `b_0..b_{p-1}`
/// from the previous sample.
pub fn lattice_step(k: &[f64], memory: &mut [f64], input: f64) -> f64 {
    let order = k.len();
    let mut f = input;
    for i in (0..order).rev() {
        f += k[i] * memory[i];
        if i + 1 < order {
            memory[i + 1] = memory[i] - k[i] * f;
        }
    }
    memory[0] = f;
    f
}

/// Concatenated stream output without level normalisation.
pub fn synthesize_raw(features: &AcousticFeatures, spec: &FrameSpec, config: &VocoderConfig) -> Result<Vec<f32>> {
    let mut out = Vec::with_capacity(features.frames() * spec.hop());
    stream_synthesize(features, spec, config, |block| out.extend_from_slice(block))?;
    Ok(out)
}

/// `T * hop` samples, peak-normalised to `config.peak`.
pub fn synthesize(features: &AcousticFeatures, spec: &FrameSpec, config: &VocoderConfig) -> Result<Waveform> {
    let mut samples = synthesize_raw(features, spec, config)?;
    peak_normalize(&mut samples, config.peak);
    Ok(Waveform::new(samples, spec.sample_rate))
}

/// Feeds frames in order and hands each hop-sized block to `sink`.
pub fn stream_synthesize(
    features: &AcousticFeatures,
    spec: &FrameSpec,
    config: &VocoderConfig,
    mut sink: impl FnMut(&[f32]),
) -> Result<()> {
    let mut synth = StreamSynthesizer::new(*spec, *config)?;
    for t in 0..features.frames() {
        if let Some(block) = synth.push(t, features.values().row(t))? {
            sink(&block);
        }
    }
    if let Some(block) = synth.finish() {
        sink(&block);
    }
    Ok(())
}

/// Scales `samples` so the largest magnitude equals `peak`; silence is left alone.
pub fn peak_normalize(samples: &mut [f32], peak: f32) {
    let max = samples.iter().fold(0.0f32, |m, v| m.max(v.abs()));
    if max > 0.0 {
        let g = peak / max;
        samples.iter_mut().for_each(|v| *v *= g);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matrix::Matrix;

    fn flat_features(t: usize, corr: f32, period_norm: f32) -> AcousticFeatures {
        AcousticFeatures::new(Matrix::from_fn(t, ACOUSTIC_DIM, |_, c| match c {
            PERIOD_COL => period_norm,
            CORRELATION_COL => corr,
            _ => 0.0,
        }))
        .unwrap()
    }

    #[test]
    fn lattice_matches_direct_form() {
        let k = [0.5, -0.3, 0.2, 0.1];
        let a = crate::dsp::reflection_to_predictor(&k);
        let mut mem = [0.0; 4];
        let mut hist = [0.0f64; 4];
        for n in 0..64 {
            let x = if n == 0 { 1.0 } else { libm::sin(n as f64 * 0.7) };
            let y_lat = lattice_step(&k, &mut mem, x);
            let y_dir = x + a.iter().zip(&hist).map(|(ai, yi)| ai * yi).sum::<f64>();
            hist.rotate_right(1);
            hist[0] = y_dir;
            assert!((y_lat - y_dir).abs() < 1e-12, "n={n}");
        }
    }

    #[test]
    fn length_contract_and_peak() {
        let spec = FrameSpec::default();
        let w = synthesize(&flat_features(100, 0.0, 0.0), &spec, &VocoderConfig::default()).unwrap();
        assert_eq!(w.len(), 16_000);
        assert!((w.peak() - 0.89).abs() < 1e-6);
        assert!(w.samples.iter().all(|v| v.is_finite()));
    }

    #[test]
    fn out_of_order_frames_are_rejected() {
        let spec = FrameSpec::default();
        let f = flat_features(6, 0.9, 0.4);
        let mut s = StreamSynthesizer::new(spec, VocoderConfig::default()).unwrap();
        for t in 0..5 {
            s.push(t, f.values().row(t)).unwrap();
        }
        assert!(matches!(s.push(6, f.values().row(5)), Err(Error::OutOfOrder { expected: 5, got: 6 })));
        assert!(matches!(s.push(4, f.values().row(4)), Err(Error::OutOfOrder { expected: 5, got: 4 })));
    }

    #[test]
    fn blocks_are_hop_sized_with_one_frame_latency() {
        let spec = FrameSpec::default();
        let f = flat_features(3, 0.9, 0.4);
        let mut s = StreamSynthesizer::new(spec, VocoderConfig::default()).unwrap();
        assert!(s.push(0, f.values().row(0)).unwrap().is_none());
        assert_eq!(s.push(1, f.values().row(1)).unwrap().unwrap().len(), 160);
        assert_eq!(s.push(2, f.values().row(2)).unwrap().unwrap().len(), 160);
        assert_eq!(s.finish().unwrap().len(), 160);
        assert!(s.finish().is_none());
        assert_eq!(s.state().memory.len(), 16);
    }

    #[test]
    fn voiced_frames_produce_periodic_output() {
        let spec = FrameSpec::default();
        // period_norm 0.4 => 128 samples => 125 Hz
        let f = flat_features(50, 1.0, 0.4);
        let w = synthesize(&f, &spec, &VocoderConfig::default()).unwrap();
        let track = crate::dsp::track_pitch(&w, &spec).unwrap();
        let median = track.median_voiced_f0().unwrap();
        assert!((median - 125.0).abs() < 3.0, "{median}");
    }
}
