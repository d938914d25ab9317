//! Speed perturbation: duration changes, pitch does not.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;

use crate::corpus::{Manifest, Utterance};
use crate::error::{Error, Result};
use crate::waveform::Waveform;

pub const DEFAULT_FACTORS: [f32; 5] = [0.4, 0.6, 0.8, 1.0, 1.2];
pub const MIN_FACTOR: f32 = 0.25;
pub const MAX_FACTOR: f32 = 4.0;

/// Playback speed multiplier: output duration is input duration / factor.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct SpeedFactor(f32);

impl SpeedFactor {
    pub fn new(factor: f32) -> Result<Self> {
        if !(MIN_FACTOR..=MAX_FACTOR).contains(&factor) {
            return Err(Error::FactorOutOfRange { factor, min: MIN_FACTOR, max: MAX_FACTOR });
        }
        Ok(Self(factor))
    }

    pub fn value(self) -> f32 {
        self.0
    }

    pub fn is_identity(self) -> bool {
        self.0 == 1.0
    }
}

pub fn default_factors() -> Vec<SpeedFactor> {
    DEFAULT_FACTORS.iter().map(|&f| SpeedFactor(f)).collect()
}

/// WSOLA parameters: analysis frame length and the +/- search tolerance.
/// Frames overlap by 50%.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WsolaConfig {
    pub frame_s: f64,
    pub search_s: f64,
}

impl Default for WsolaConfig {
    fn default() -> Self {
        Self { frame_s: 0.020, search_s: 0.005 }
    }
}

pub fn time_stretch(wave: &Waveform, factor: SpeedFactor) -> Result<Waveform> {
    time_stretch_with(wave, factor, &WsolaConfig::default())
}

/// Waveform-similarity overlap-add. Each output frame is taken from near
/// its nominal input position, shifted within the search tolerance to best
/// match the natural continuation of the previously copied frame.
pub fn time_stretch_with(wave: &Waveform, factor: SpeedFactor, cfg: &WsolaConfig) -> Result<Waveform> {
    let sr = f64::from(wave.sample_rate);
    let min_len = libm::ceil(0.1 * sr) as usize;
    if wave.len() < min_len {
        return Err(Error::SignalTooShort { len: wave.len(), min: min_len });
    }
    if factor.is_identity() {
        return Ok(wave.clone());
    }
    let nw = (libm::round(cfg.frame_s * sr) as usize).max(4) & !1;
    let hs = nw / 2;
    let tol = libm::round(cfg.search_s * sr) as isize;
    let n = wave.len();
    let out_len = libm::round(n as f64 / f64::from(factor.value())) as usize;
    let ha = hs as f64 * f64::from(factor.value());
    let window: Vec<f64> = (0..nw).map(|i| 0.5 - 0.5 * libm::cos(2.0 * PI * i as f64 / nw as f64)).collect();

    let pad = nw as isize + tol + 1;
    let mut xp = vec![0.0f64; n + 2 * pad as usize];
    for (d, &s) in xp[pad as usize..pad as usize + n].iter_mut().zip(&wave.samples) {
        *d = f64::from(s);
    }
    let last_center = n as isize + hs as isize;
    // segment of `nw` samples centred on input sample `c`
    let segment = |c: isize| -> &[f64] {
        let c = c.clamp(-(hs as isize), last_center);
        let start = (c - hs as isize + pad) as usize;
        &xp[start..start + nw]
    };

    let mut y = vec![0.0f64; out_len + nw];
    let mut wsum = vec![0.0f64; out_len + nw];
    let mut prev_center: isize = 0;
    let mut k = 0usize;
    while k * hs < out_len + hs {
        let center = if k == 0 {
            0
        } else {
            let nominal = libm::round(k as f64 * ha) as isize;
            let natural = segment(prev_center + hs as isize);
            let mut best = (f64::NEG_INFINITY, nominal);
            for delta in -tol..=tol {
                let cand = segment(nominal + delta);
                let (mut dot, mut energy) = (0.0, 0.0);
                for (a, b) in cand.iter().zip(natural) {
                    dot += a * b;
                    energy += a * a;
                }
                let score = if energy > 1e-12 { dot / libm::sqrt(energy) } else { 0.0 };
                if score > best.0 {
                    best = (score, nominal + delta);
                }
            }
            best.1
        };
        let seg = segment(center);
        // output frame k is centred on output sample k * hs, stored shifted by hs
        let base = k * hs;
        for i in 0..nw {
            if base + i < y.len() {
                y[base + i] += window[i] * seg[i];
                wsum[base + i] += window[i];
            }
        }
        prev_center = center;
        k += 1;
    }

    let samples = (0..out_len)
        .map(|m| {
            let (v, w) = (y[m + hs], wsum[m + hs]);
            (if w > 1e-6 { v / w } else { v }) as f32
        })
        .collect();
    Ok(Waveform::new(samples, wave.sample_rate))
}

/// One entry per `(utterance, factor)`, entry-major. Factor 1.0 keeps the
/// original id; other factors append `_sp<factor>`.
pub fn expand_manifest(manifest: &Manifest, factors: &[SpeedFactor]) -> Result<Manifest> {
    if factors.is_empty() {
        return Ok(manifest.clone());
    }
    for (i, f) in factors.iter().enumerate() {
        if factors[..i].contains(f) {
            return Err(Error::DuplicateFactor(f.value()));
        }
    }
    let mut entries = Vec::with_capacity(manifest.len() * factors.len());
    for e in &manifest.entries {
        for f in factors {
            let id = if f.is_identity() { e.id.clone() } else { format!("{}_sp{}", e.id, f.value()) };
            entries.push(Utterance {
                id,
                speaker: e.speaker.clone(),
                audio_path: e.audio_path.clone(),
                duration_s: e.duration_s / f64::from(f.value()),
                speed: e.speed * f.value(),
            });
        }
    }
    Manifest::new(entries, manifest.split)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::Split;
    use crate::dsp::{track_pitch, FrameSpec};
    use alloc::string::ToString;

    fn harmonic(f0: f64, seconds: f64) -> Waveform {
        let sr = 16_000u32;
        let n = (seconds * f64::from(sr)) as usize;
        let samples = (0..n)
            .map(|i| {
                let t = i as f64 / f64::from(sr);
                (1..=8).map(|h| libm::sin(2.0 * PI * f0 * h as f64 * t) / h as f64).sum::<f64>() as f32 * 0.3
            })
            .collect();
        Waveform::new(samples, sr)
    }

    #[test]
    fn identity_is_bypass() {
        let w = harmonic(150.0, 0.5);
        assert_eq!(time_stretch(&w, SpeedFactor::new(1.0).unwrap()).unwrap(), w);
    }

    #[test]
    fn stretch_keeps_pitch() {
        let w = harmonic(150.0, 2.0);
        let out = time_stretch(&w, SpeedFactor::new(0.5).unwrap()).unwrap();
        assert!((out.duration_s() - 4.0).abs() / 4.0 < 0.02);
        let spec = FrameSpec::default();
        let f_in = track_pitch(&w, &spec).unwrap().median_voiced_f0().unwrap();
        let f_out = track_pitch(&out, &spec).unwrap().median_voiced_f0().unwrap();
        assert!((f_out - f_in).abs() / f_in < 0.05, "{f_in} vs {f_out}");
    }

    #[test]
    fn factor_range_and_length() {
        assert!(SpeedFactor::new(0.1).is_err());
        assert!(SpeedFactor::new(5.0).is_err());
        let short = Waveform::silence(1000, 16_000);
        assert!(matches!(
            time_stretch(&short, SpeedFactor::new(0.8).unwrap()),
            Err(Error::SignalTooShort { .. })
        ));
    }

    #[test]
    fn manifest_expansion() {
        let entries = (0..10).map(|i| Utterance::new(format!("u{i}"), "s", "x.wav", 2.0)).collect();
        let m = Manifest::new(entries, Split::Train).unwrap();
        let e = expand_manifest(&m, &default_factors()).unwrap();
        assert_eq!(e.len(), 50);
        assert_eq!(e.entries[3].id, "u0");
        assert_eq!(e.entries[0].id, "u0_sp0.4");
        assert!((e.entries[4].duration_s - 2.0 / 1.2).abs() < 1e-6);
        assert_eq!(expand_manifest(&m, &[]).unwrap(), m);
        let f = SpeedFactor::new(0.8).unwrap();
        assert_eq!(expand_manifest(&m, &[f, f]).unwrap_err().to_string(), "duplicate factor 0.8");
    }
}
