//! Speaker log-f0 statistics and the linear log-f0 mapping between speakers:
//! `log f0_y = (log f0_x - mu_x) * (sigma_y / sigma_x) + mu_y`.
//!
//! `sigma` is the standard deviation of natural-log f0 over voiced frames.

use crate::dsp::PitchTrack;
use crate::error::{Error, Result};

/// Default lower bound on voiced frames needed for usable statistics.
pub const MIN_VOICED_FRAMES: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct PitchStats {
    pub mu: f64,
    pub sigma: f64,
    pub n_frames: usize,
}

impl PitchStats {
    pub fn new(mu: f64, sigma: f64, n_frames: usize) -> Result<Self> {
        if !mu.is_finite() || !(sigma > 0.0) || !sigma.is_finite() {
            return Err(Error::InvalidConfig(alloc::format!("invalid pitch stats mu={mu} sigma={sigma}")));
        }
        Ok(Self { mu, sigma, n_frames })
    }
}

/// Mean and population standard deviation of `ln f0` over the voiced frames
/// of all tracks.
pub fn estimate_stats<'a>(tracks: impl IntoIterator<Item = &'a PitchTrack>, min_frames: usize) -> Result<PitchStats> {
    let (mut n, mut sum) = (0usize, 0.0f64);
    let mut logs = alloc::vec::Vec::new();
    for track in tracks {
        for f in track.voiced_f0() {
            let l = libm::log(f);
            logs.push(l);
            sum += l;
            n += 1;
        }
    }
    if n < min_frames.max(1) {
        return Err(Error::InsufficientVoiced { got: n, min: min_frames.max(1) });
    }
    let mu = sum / n as f64;
    let var = logs.iter().map(|l| (l - mu) * (l - mu)).sum::<f64>() / n as f64;
    let sigma = libm::sqrt(var);
    if !(sigma > 1e-9) {
        return Err(Error::ZeroVariance);
    }
    Ok(PitchStats { mu, sigma, n_frames: n })
}

/// The affine map in the log domain.
pub fn convert_log_f0(log_f0: f64, src: &PitchStats, tgt: &PitchStats) -> f64 {
    (log_f0 - src.mu) * (tgt.sigma / src.sigma) + tgt.mu
}

/// Maps voiced frames through [`convert_log_f0`]; unvoiced frames, voicing
/// flags and correlations are untouched and periods follow the new f0.
/// When the two statistics coincide the track is returned unchanged.
pub fn convert_f0(track: &PitchTrack, src: &PitchStats, tgt: &PitchStats) -> Result<PitchTrack> {
    if !(src.sigma > 0.0) {
        return Err(Error::ZeroVariance);
    }
    if src.mu == tgt.mu && src.sigma == tgt.sigma {
        return Ok(track.clone());
    }
    let mut out = track.clone();
    let sr = f64::from(track.sample_rate);
    for t in 0..track.frames() {
        if track.vuv[t] {
            let f = libm::exp(convert_log_f0(libm::log(track.f0_hz[t]), src, tgt));
            out.f0_hz[t] = f;
            out.period_samples[t] = sr / f;
        }
    }
    Ok(out)
}
