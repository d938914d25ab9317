use alloc::vec;
use alloc::vec::Vec;

use super::frame::FrameSpec;
use crate::error::{Error, Result};
use crate::waveform::Waveform;

pub const F0_MIN_HZ: f64 = 50.0;
pub const F0_MAX_HZ: f64 = 600.0;

/// Normalised-autocorrelation pitch tracker settings.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(deny_unknown_fields, default))]
pub struct PitchConfig {
    pub f0_min: f64,
    pub f0_max: f64,
    /// A frame is voiced when its interpolated correlation peak reaches this.
    pub vuv_threshold: f64,
    pub median_width: usize,
    /// Correlation window length in seconds.
    pub window_s: f64,
}

impl Default for PitchConfig {
    fn default() -> Self {
        Self { f0_min: F0_MIN_HZ, f0_max: F0_MAX_HZ, vuv_threshold: 0.3, median_width: 5, window_s: 0.025 }
    }
}

/// Per-frame pitch on the shared 10 ms grid. Unvoiced frames carry
/// `f0_hz == 0` and `period_samples == 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct PitchTrack {
    pub sample_rate: u32,
    pub f0_hz: Vec<f64>,
    pub vuv: Vec<bool>,
    pub period_samples: Vec<f64>,
    pub correlation: Vec<f64>,
}

impl PitchTrack {
    /// Builds a track from f0 values (0 = unvoiced) and correlations,
    /// deriving the voicing flags and periods.
    pub fn from_f0(sample_rate: u32, f0_hz: Vec<f64>, correlation: Vec<f64>) -> Result<Self> {
        if f0_hz.len() != correlation.len() {
            return Err(Error::FrameMismatch { what: "pitch correlation", expected: f0_hz.len(), got: correlation.len() });
        }
        let vuv: Vec<bool> = f0_hz.iter().map(|&f| f > 0.0).collect();
        let period_samples =
            f0_hz.iter().map(|&f| if f > 0.0 { f64::from(sample_rate) / f } else { 0.0 }).collect();
        let correlation = correlation.into_iter().map(|c| c.clamp(0.0, 1.0)).collect();
        Ok(Self { sample_rate, f0_hz, vuv, period_samples, correlation })
    }

    pub fn expect_frames(&self, frames: usize) -> Result<()> {
        if self.frames() != frames {
            return Err(Error::FrameMismatch { what: "pitch track", expected: frames, got: self.frames() });
        }
        Ok(())
    }

    pub fn frames(&self) -> usize {
        self.f0_hz.len()
    }

    pub fn voiced_count(&self) -> usize {
        self.vuv.iter().filter(|&&v| v).count()
    }

    /// f0 of voiced frames in order.
    pub fn voiced_f0(&self) -> impl Iterator<Item = f64> + '_ {
        self.f0_hz.iter().zip(&self.vuv).filter(|(_, &v)| v).map(|(&f, _)| f)
    }

    /// Median f0 over voiced frames, `None` when nothing is voiced.
    pub fn median_voiced_f0(&self) -> Option<f64> {
        let mut v: Vec<f64> = self.voiced_f0().collect();
        median_in_place(&mut v)
    }
}

pub(crate) fn median_in_place(v: &mut [f64]) -> Option<f64> {
    if v.is_empty() {
        return None;
    }
    v.sort_by(f64::total_cmp);
    let n = v.len();
    Some(if n % 2 == 1 { v[n / 2] } else { 0.5 * (v[n / 2 - 1] + v[n / 2]) })
}

pub fn track_pitch(wave: &Waveform, spec: &FrameSpec) -> Result<PitchTrack> {
    track_pitch_with(wave, spec, &PitchConfig::default())
}

/// Normalised cross-correlation over the lag range of `[f0_min, f0_max]`,
/// parabolic refinement of the chosen peak, correlation-threshold voicing
/// and a median filter over neighbouring voiced frames.
pub fn track_pitch_with(wave: &Waveform, spec: &FrameSpec, cfg: &PitchConfig) -> Result<PitchTrack> {
    spec.validate()?;
    if wave.sample_rate != spec.sample_rate {
        return Err(Error::InvalidConfig(alloc::format!(
            "waveform sample rate {} differs from analysis rate {}",
            wave.sample_rate,
            spec.sample_rate
        )));
    }
    if !(cfg.f0_min > 0.0 && cfg.f0_max > cfg.f0_min) {
        return Err(Error::InvalidConfig(alloc::format!("bad f0 range [{}, {}]", cfg.f0_min, cfg.f0_max)));
    }
    let sr = f64::from(spec.sample_rate);
    let lag_min = (libm::floor(sr / cfg.f0_max) as usize).max(2);
    let lag_max = libm::ceil(sr / cfg.f0_min) as usize;
    let n = wave.len();
    if n < 2 * lag_max {
        return Err(Error::SignalTooShort { len: n, min: 2 * lag_max });
    }
    let win = (libm::round(cfg.window_s * sr) as usize).max(lag_max);

    let pad = win / 2 + lag_max + 2;
    let mut x = vec![0.0f64; n + 2 * pad];
    for (dst, &s) in x[pad..pad + n].iter_mut().zip(&wave.samples) {
        *dst = f64::from(s);
    }

    let frames = spec.num_frames(n);
    let hop = spec.hop();
    let mut raw_f0 = vec![0.0; frames];
    let mut corr = vec![0.0; frames];
    let mut nccf = vec![0.0; lag_max + 2];

    for t in 0..frames {
        let center = t * hop + pad;
        for (lag, slot) in nccf.iter_mut().enumerate().skip(lag_min - 1) {
            let start = center - win / 2 - lag / 2;
            let a = &x[start..start + win];
            let b = &x[start + lag..start + lag + win];
            let (mut dot, mut ea, mut eb) = (0.0, 0.0, 0.0);
            for (p, q) in a.iter().zip(b) {
                dot += p * q;
                ea += p * p;
                eb += q * q;
            }
            *slot = if ea > 1e-10 && eb > 1e-10 { dot / libm::sqrt(ea * eb) } else { 0.0 };
        }

        let peaks: Vec<usize> = (lag_min..=lag_max)
            .filter(|&l| nccf[l] > 0.0 && nccf[l] >= nccf[l - 1] && nccf[l] > nccf[l + 1])
            .collect();
        let best = peaks.iter().map(|&l| nccf[l]).fold(0.0, f64::max);
        // smallest lag close to the global maximum, which avoids picking a
        // multiple of the true period
        let Some(&lag) = peaks.iter().find(|&&l| nccf[l] >= 0.9 * best) else {
            continue;
        };
        let (ym, y0, yp) = (nccf[lag - 1], nccf[lag], nccf[lag + 1]);
        let denom = ym - 2.0 * y0 + yp;
        let (shift, peak) = if denom < 0.0 {
            let d = (0.5 * (ym - yp) / denom).clamp(-0.5, 0.5);
            (d, y0 - 0.25 * (ym - yp) * d)
        } else {
            (0.0, y0)
        };
        corr[t] = peak.clamp(0.0, 1.0);
        if peak >= cfg.vuv_threshold {
            raw_f0[t] = (sr / (lag as f64 + shift)).clamp(cfg.f0_min, cfg.f0_max);
        }
    }

    let half = cfg.median_width / 2;
    let mut f0 = raw_f0.clone();
    let mut scratch = Vec::with_capacity(cfg.median_width);
    for t in 0..frames {
        if raw_f0[t] <= 0.0 {
            continue;
        }
        scratch.clear();
        let lo = t.saturating_sub(half);
        let hi = (t + half).min(frames - 1);
        scratch.extend(raw_f0[lo..=hi].iter().copied().filter(|&f| f > 0.0));
        if let Some(m) = median_in_place(&mut scratch) {
            f0[t] = m;
        }
    }

    PitchTrack::from_f0(spec.sample_rate, f0, corr)
}

#[cfg(test)]
mod tests {
    use super::*;
    use core::f64::consts::PI;

    fn sawtooth(f0: f64, seconds: f64, sr: u32) -> Waveform {
        let n = (seconds * f64::from(sr)) as usize;
        let samples = (0..n)
            .map(|i| {
                let ph = (i as f64 * f0 / f64::from(sr)).fract();
                (0.5 * (2.0 * ph - 1.0)) as f32
            })
            .collect();
        Waveform::new(samples, sr)
    }

    #[test]
    fn sawtooth_120hz() {
        let spec = FrameSpec::default();
        let track = track_pitch(&sawtooth(120.0, 1.0, 16_000), &spec).unwrap();
        assert_eq!(track.frames(), 101);
        let med = track.median_voiced_f0().unwrap();
        assert!((med - 120.0).abs() <= 3.0, "median {med}");
        for t in 5..96 {
            assert!(track.vuv[t], "frame {t} unvoiced");
            assert!((track.period_samples[t] - 16_000.0 / 120.0).abs() < 3.5);
        }
    }

    #[test]
    fn silence_is_unvoiced() {
        let track = track_pitch(&Waveform::silence(8000, 16_000), &FrameSpec::default()).unwrap();
        assert!(track.vuv.iter().all(|&v| !v));
        assert!(track.f0_hz.iter().all(|&f| f == 0.0));
    }

    #[test]
    fn invariants_hold() {
        let sr = 16_000;
        let samples =
            (0..12_000).map(|i| libm::sin(2.0 * PI * 180.0 * i as f64 / f64::from(sr)) as f32).collect();
        let track = track_pitch(&Waveform::new(samples, sr), &FrameSpec::default()).unwrap();
        for t in 0..track.frames() {
            assert_eq!(track.vuv[t], track.f0_hz[t] > 0.0);
            assert!((0.0..=1.0).contains(&track.correlation[t]));
            if track.vuv[t] {
                assert!((track.period_samples[t] - f64::from(sr) / track.f0_hz[t]).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn too_short_is_rejected() {
        assert!(matches!(
            track_pitch(&Waveform::silence(500, 16_000), &FrameSpec::default()),
            Err(Error::SignalTooShort { .. })
        ));
    }
}
