//! Deterministic speech-like corpus: additive harmonic synthesis shaped by
//! phone-dependent formants, band-limited noise for fricatives, and an
//! intonation contour around a speaker's base pitch. Every utterance comes
//! with per-frame phone labels.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;

use rand::{Rng as _, SeedableRng};

use crate::nn::Rng;
use crate::waveform::Waveform;

#[derive(Debug, Clone, Copy, PartialEq)]
enum Source {
    Silence,
    Voiced { gain: f64 },
    Noise { gain: f64, center: f64, bandwidth: f64 },
    Mixed { voice: f64, noise: f64, center: f64, bandwidth: f64 },
}

#[derive(Debug, Clone, Copy)]
struct Phone {
    formants: [f64; 3],
    source: Source,
}

const PHONES: [Phone; 15] = [
    Phone { formants: [500.0, 1500.0, 2500.0], source: Source::Silence },
    Phone { formants: [730.0, 1090.0, 2440.0], source: Source::Voiced { gain: 1.0 } },
    Phone { formants: [270.0, 2290.0, 3010.0], source: Source::Voiced { gain: 0.8 } },
    Phone { formants: [300.0, 870.0, 2240.0], source: Source::Voiced { gain: 0.8 } },
    Phone { formants: [530.0, 1840.0, 2480.0], source: Source::Voiced { gain: 0.9 } },
    Phone { formants: [570.0, 840.0, 2410.0], source: Source::Voiced { gain: 0.9 } },
    Phone { formants: [660.0, 1720.0, 2410.0], source: Source::Voiced { gain: 1.0 } },
    Phone { formants: [250.0, 1100.0, 2300.0], source: Source::Voiced { gain: 0.35 } },
    Phone { formants: [250.0, 1700.0, 2600.0], source: Source::Voiced { gain: 0.35 } },
    Phone { formants: [360.0, 1300.0, 2700.0], source: Source::Voiced { gain: 0.55 } },
    Phone { formants: [420.0, 1300.0, 1600.0], source: Source::Voiced { gain: 0.55 } },
    Phone {
        formants: [500.0, 1500.0, 2500.0],
        source: Source::Noise { gain: 0.25, center: 5500.0, bandwidth: 1800.0 },
    },
    Phone {
        formants: [500.0, 1500.0, 2500.0],
        source: Source::Noise { gain: 0.25, center: 3000.0, bandwidth: 1200.0 },
    },
    Phone {
        formants: [500.0, 1500.0, 2500.0],
        source: Source::Noise { gain: 0.12, center: 4000.0, bandwidth: 3500.0 },
    },
    Phone {
        formants: [300.0, 1500.0, 2500.0],
        source: Source::Mixed { voice: 0.3, noise: 0.15, center: 5000.0, bandwidth: 1800.0 },
    },
];

/// Number of distinct phone labels produced.
pub const TOY_PHONES: usize = PHONES.len();
const SILENCE: usize = 0;
const VOWELS: core::ops::Range<usize> = 1..7;
const CONSONANTS: core::ops::Range<usize> = 7..15;
const VOICED_CONSONANTS: core::ops::Range<usize> = 7..11;

/// Base pitch and vocal-tract scale of a synthetic speaker.
#[derive(Debug, Clone, PartialEq)]
pub struct ToySpeaker {
    pub name: String,
    pub f0_hz: f64,
    pub formant_scale: f64,
}

impl ToySpeaker {
    pub fn new(name: impl Into<String>, f0_hz: f64, formant_scale: f64) -> Self {
        Self { name: name.into(), f0_hz, formant_scale }
    }

    /// Presets `A` (low), `B` (high) and `C` (middle).
    pub fn preset(name: &str) -> Option<Self> {
        match name {
            "A" => Some(Self::new("A", 120.0, 1.0)),
            "B" => Some(Self::new("B", 210.0, 1.15)),
            "C" => Some(Self::new("C", 160.0, 1.07)),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ToyUtterance {
    pub id: String,
    pub speaker: String,
    pub wave: Waveform,
    /// One label per 10 ms analysis frame (`len / hop + 1` entries).
    pub labels: Vec<u32>,
    /// Ground-truth f0 per analysis frame, 0 where no voicing source is active.
    pub f0_hz: Vec<f64>,
}

struct Segment {
    phone: usize,
    start: usize,
    end: usize,
}

fn plan_segments(rng: &mut Rng, n: usize, sr: f64, voiced_only: bool) -> Vec<Segment> {
    let ms = |v: f64| (v * sr / 1000.0) as usize;
    if voiced_only {
        return plan_voiced(rng, n, &ms);
    }
    let mut segs = Vec::new();
    let lead = ms(rng.gen_range(80.0..120.0));
    segs.push(Segment { phone: SILENCE, start: 0, end: lead });
    let tail = ms(rng.gen_range(80.0..120.0));
    let mut pos = lead;
    while pos < n.saturating_sub(tail) {
        let (phone, len) = if rng.gen_bool(0.08) {
            (SILENCE, ms(rng.gen_range(60.0..120.0)))
        } else {
            let c = rng.gen_range(CONSONANTS);
            segs.push(Segment { phone: c, start: pos, end: pos + ms(rng.gen_range(50.0..110.0)) });
            pos = segs.last().map_or(pos, |s| s.end);
            (rng.gen_range(VOWELS), ms(rng.gen_range(80.0..180.0)))
        };
        segs.push(Segment { phone, start: pos, end: pos + len });
        pos += len;
    }
    for s in &mut segs {
        s.end = s.end.min(n);
    }
    segs.retain(|s| s.start < s.end);
    if let Some(last) = segs.last() {
        let start = last.end;
        if start < n {
            segs.push(Segment { phone: SILENCE, start, end: n });
        }
    }
    segs
}

/// Alternating voiced consonants and vowels with no pauses.
fn plan_voiced(rng: &mut Rng, n: usize, ms: &dyn Fn(f64) -> usize) -> Vec<Segment> {
    let mut segs = Vec::new();
    let mut pos = 0;
    while pos < n {
        for (phone, len) in [
            (rng.gen_range(VOICED_CONSONANTS), ms(rng.gen_range(50.0..110.0))),
            (rng.gen_range(VOWELS), ms(rng.gen_range(80.0..180.0))),
        ] {
            segs.push(Segment { phone, start: pos, end: (pos + len).min(n) });
            pos += len;
        }
    }
    segs.retain(|s| s.start < s.end);
    segs
}

/// Control parameters at one 5 ms control point.
#[derive(Debug, Clone, Copy, Default)]
struct Control {
    voice: f64,
    noise: f64,
    center: f64,
    bandwidth: f64,
    formants: [f64; 3],
}

fn control_for(phone: usize, scale: f64) -> Control {
    let p = PHONES[phone];
    let formants = p.formants.map(|f| f * scale);
    let (voice, noise, center, bandwidth) = match p.source {
        Source::Silence => (0.0, 0.0, 3000.0, 2000.0),
        Source::Voiced { gain } => (gain, 0.0, 3000.0, 2000.0),
        Source::Noise { gain, center, bandwidth } => (0.0, gain, center, bandwidth),
        Source::Mixed { voice, noise, center, bandwidth } => (voice, noise, center, bandwidth),
    };
    Control { voice, noise, center: center * scale, bandwidth, formants }
}

/// Formant envelope with a gentle spectral tilt.
fn envelope(f: f64, formants: &[f64; 3]) -> f64 {
    const BW: [f64; 3] = [90.0, 120.0, 170.0];
    const AMP: [f64; 3] = [1.0, 0.6, 0.3];
    let mut e = 0.0;
    for i in 0..3 {
        let d = (f - formants[i]) / BW[i];
        e += AMP[i] / (1.0 + d * d);
    }
    (e + 0.02) / (1.0 + f / 1500.0)
}

/// Resonator `y = g x + 2 r cos(theta) y1 - r^2 y2` normalised to unit output variance.
fn resonator(center: f64, bandwidth: f64, sr: f64) -> (f64, f64, f64) {
    let r = libm::exp(-PI * bandwidth / sr);
    let theta = 2.0 * PI * center / sr;
    let a1 = 2.0 * r * libm::cos(theta);
    let a2 = -r * r;
    let c2 = libm::cos(2.0 * theta);
    let var = (1.0 + r * r) / ((1.0 - r * r) * (1.0 + r * r * r * r - 2.0 * r * r * c2));
    (1.0 / libm::sqrt(var), a1, a2)
}

const CONTROL_MS: f64 = 5.0;
const MAX_HARMONIC_HZ: f64 = 7000.0;
const PEAK: f32 = 0.6;

/// One utterance of roughly `duration_s` seconds; identical for identical arguments.
pub fn synthesize(speaker: &ToySpeaker, seed: u64, duration_s: f64, sample_rate: u32) -> ToyUtterance {
    render(speaker, seed, duration_s, sample_rate, false)
}

/// Continuously voiced variant: vowels and voiced consonants only, no
/// pauses or fricatives. Ids carry a `v` before the seed.
pub fn synthesize_voiced(speaker: &ToySpeaker, seed: u64, duration_s: f64, sample_rate: u32) -> ToyUtterance {
    render(speaker, seed, duration_s, sample_rate, true)
}

fn render(speaker: &ToySpeaker, seed: u64, duration_s: f64, sample_rate: u32, voiced_only: bool) -> ToyUtterance {
    let sr = f64::from(sample_rate);
    let n = ((duration_s * sr) as usize).max(1);
    let mut rng = Rng::seed_from_u64(seed ^ libm::round(speaker.f0_hz * 1000.0) as u64);
    let segs = plan_segments(&mut rng, n, sr, voiced_only);
    let phone_at = |i: usize| segs.iter().find(|s| i >= s.start && i < s.end).map_or(SILENCE, |s| s.phone);

    let step = (CONTROL_MS * sr / 1000.0) as usize;
    let n_ctrl = n / step + 2;
    let raw: Vec<Control> = (0..n_ctrl).map(|c| control_for(phone_at((c * step).min(n - 1)), speaker.formant_scale)).collect();
    // Three-point smoothing of the control track gives 15 ms transitions.
    let ctrl: Vec<Control> = (0..n_ctrl)
        .map(|c| {
            let pick = |d: isize| raw[(c as isize + d).clamp(0, n_ctrl as isize - 1) as usize];
            let (a, b, m) = (pick(-1), pick(1), raw[c]);
            let avg = |f: fn(&Control) -> f64| (f(&a) + 2.0 * f(&m) + f(&b)) / 4.0;
            let mut formants = m.formants;
            for (k, v) in formants.iter_mut().enumerate() {
                *v = (a.formants[k] + 2.0 * m.formants[k] + b.formants[k]) / 4.0;
            }
            Control {
                voice: avg(|c| c.voice),
                noise: avg(|c| c.noise),
                center: avg(|c| c.center),
                bandwidth: avg(|c| c.bandwidth),
                formants,
            }
        })
        .collect();

    let phase0 = rng.gen_range(0.0..2.0 * PI);
    let rate = rng.gen_range(0.5..1.0);
    let f0_at = |i: usize| {
        let t = i as f64 / sr;
        let dur = n as f64 / sr;
        speaker.f0_hz * libm::exp(0.12 * libm::sin(2.0 * PI * rate * t + phase0) - 0.08 * t / dur)
    };

    let max_h = (MAX_HARMONIC_HZ / (speaker.f0_hz * 0.8)) as usize + 1;
    let harmonic_amps = |c: &Control, f0: f64| -> Vec<f64> {
        (1..=max_h)
            .map(|h| {
                let f = h as f64 * f0;
                if f >= MAX_HARMONIC_HZ || f >= sr / 2.0 - 200.0 {
                    0.0
                } else {
                    envelope(f, &c.formants)
                }
            })
            .collect()
    };

    let mut samples = vec![0.0f32; n];
    let mut phase = 0.0f64;
    let (mut y1, mut y2) = (0.0f64, 0.0f64);
    let mut amps_lo = harmonic_amps(&ctrl[0], f0_at(0));
    for c in 0..n_ctrl - 1 {
        let start = c * step;
        if start >= n {
            break;
        }
        let end = ((c + 1) * step).min(n);
        let amps_hi = harmonic_amps(&ctrl[c + 1], f0_at((c + 1) * step));
        let (lo, hi) = (&ctrl[c], &ctrl[c + 1]);
        for i in start..end {
            let u = (i - start) as f64 / step as f64;
            let lerp = |a: f64, b: f64| a + (b - a) * u;
            let f0 = f0_at(i);
            phase += 2.0 * PI * f0 / sr;
            if phase > 2.0 * PI {
                phase -= 2.0 * PI;
            }
            let voice = lerp(lo.voice, hi.voice);
            let mut v = 0.0;
            if voice > 1e-4 {
                for (h, (a, b)) in amps_lo.iter().zip(&amps_hi).enumerate() {
                    let amp = lerp(*a, *b);
                    if amp > 0.0 {
                        v += amp * libm::sin((h + 1) as f64 * phase);
                    }
                }
                v *= voice;
            }
            let (g, a1, a2) = resonator(lerp(lo.center, hi.center), lerp(lo.bandwidth, hi.bandwidth), sr);
            let white: f64 = rng.gen_range(-1.0..1.0) * libm::sqrt(3.0);
            let y = g * white + a1 * y1 + a2 * y2;
            y2 = y1;
            y1 = y;
            let noise = lerp(lo.noise, hi.noise) * y + 0.01 * white;
            samples[i] = (v + noise) as f32;
        }
        amps_lo = amps_hi;
    }
    let peak = samples.iter().fold(0.0f32, |m, v| m.max(v.abs()));
    if peak > 0.0 {
        samples.iter_mut().for_each(|v| *v *= PEAK / peak);
    }

    let hop = (sample_rate / 100) as usize;
    let frames = n / hop + 1;
    let labels = (0..frames).map(|t| phone_at((t * hop).min(n - 1)) as u32).collect();
    let f0_hz = (0..frames)
        .map(|t| {
            let i = (t * hop).min(n - 1);
            let c = ctrl[(i / step).min(n_ctrl - 1)];
            if c.voice > 0.05 {
                f0_at(i)
            } else {
                0.0
            }
        })
        .collect();
    ToyUtterance {
        id: format!("{}_{}{seed:04}", speaker.name, if voiced_only { "v" } else { "" }),
        speaker: speaker.name.clone(),
        wave: Waveform::new(samples, sample_rate),
        labels,
        f0_hz,
    }
}

/// `count` utterances with seeds `first_seed..first_seed + count`.
pub fn corpus(speaker: &ToySpeaker, count: usize, first_seed: u64, duration_s: f64, sample_rate: u32) -> Vec<ToyUtterance> {
    (0..count as u64).map(|i| synthesize(speaker, first_seed + i, duration_s, sample_rate)).collect()
}
