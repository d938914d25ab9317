use alloc::format;
use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;

use super::fft::Fft;
use crate::error::{Error, Result};

/// Frame shift shared by every feature stream: 10 ms.
pub const HOP_S: f64 = 0.010;

/// Analysis grid: 10 ms hop, Hann window of `win_s`, FFT of `fft_size`
/// points, centre padding by reflection.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(deny_unknown_fields))]
pub struct FrameSpec {
    pub sample_rate: u32,
    pub win_s: f64,
    pub fft_size: usize,
}

impl Default for FrameSpec {
    fn default() -> Self {
        Self { sample_rate: 16_000, win_s: 0.025, fft_size: 512 }
    }
}

impl FrameSpec {
    pub fn validate(&self) -> Result<()> {
        if self.sample_rate == 0 || self.sample_rate % 100 != 0 {
            return Err(Error::InvalidConfig(format!(
                "sample rate {} must be a positive multiple of 100 Hz for a 10 ms hop",
                self.sample_rate
            )));
        }
        if !(self.win_s >= HOP_S) {
            return Err(Error::InvalidConfig(format!("window {} s shorter than the 10 ms hop", self.win_s)));
        }
        if !self.fft_size.is_power_of_two() || self.fft_size < self.win_length() {
            return Err(Error::InvalidConfig(format!(
                "fft size {} must be a power of two of at least {} samples",
                self.fft_size,
                self.win_length()
            )));
        }
        Ok(())
    }

    pub fn hop_s(&self) -> f64 {
        HOP_S
    }

    pub fn hop(&self) -> usize {
        (self.sample_rate / 100) as usize
    }

    pub fn win_length(&self) -> usize {
        libm::round(self.win_s * f64::from(self.sample_rate)) as usize
    }

    pub fn num_bins(&self) -> usize {
        self.fft_size / 2 + 1
    }

    /// Frames produced for a signal of `num_samples` samples.
    pub fn num_frames(&self, num_samples: usize) -> usize {
        num_samples / self.hop() + 1
    }
}

/// `frames x bins` power spectrum, `|X(k)|^2` of the windowed frame.
#[derive(Debug, Clone, PartialEq)]
pub struct PowerSpectrogram {
    pub frames: usize,
    pub bins: usize,
    pub data: Vec<f64>,
}

impl PowerSpectrogram {
    pub fn row(&self, t: usize) -> &[f64] {
        &self.data[t * self.bins..(t + 1) * self.bins]
    }
}

/// Short-time power spectrum on the shared frame grid.
#[derive(Debug, Clone)]
pub struct Stft {
    spec: FrameSpec,
    fft: Fft,
    window: Vec<f64>,
}

impl Stft {
    pub fn new(spec: FrameSpec) -> Result<Self> {
        spec.validate()?;
        let win = spec.win_length();
        // periodic Hann
        let window = (0..win).map(|i| 0.5 - 0.5 * libm::cos(2.0 * PI * i as f64 / win as f64)).collect();
        Ok(Self { spec, fft: Fft::new(spec.fft_size)?, window })
    }

    pub fn spec(&self) -> &FrameSpec {
        &self.spec
    }

    /// Sum of squared window samples.
    pub fn window_energy(&self) -> f64 {
        self.window.iter().map(|w| w * w).sum()
    }

    pub fn power(&self, samples: &[f32]) -> Result<PowerSpectrogram> {
        let n = samples.len();
        let win = self.window.len();
        if n < win {
            return Err(Error::SignalTooShort { len: n, min: win });
        }
        let nfft = self.spec.fft_size;
        let pad = nfft / 2;
        let hop = self.spec.hop();
        let frames = self.spec.num_frames(n);
        let bins = self.spec.num_bins();
        let offset = (nfft - win) / 2;
        let reflect = |i: isize| -> f64 {
            let n = n as isize;
            let j = if i < 0 {
                -i
            } else if i >= n {
                2 * n - 2 - i
            } else {
                i
            };
            f64::from(samples[j.clamp(0, n - 1) as usize])
        };

        let mut data = Vec::with_capacity(frames * bins);
        let mut re = vec![0.0; nfft];
        let mut im = vec![0.0; nfft];
        for t in 0..frames {
            re.iter_mut().for_each(|v| *v = 0.0);
            im.iter_mut().for_each(|v| *v = 0.0);
            let start = (t * hop) as isize - pad as isize + offset as isize;
            for (i, w) in self.window.iter().enumerate() {
                re[offset + i] = w * reflect(start + i as isize);
            }
            self.fft.forward(&mut re, &mut im);
            data.extend((0..bins).map(|k| re[k] * re[k] + im[k] * im[k]));
        }
        Ok(PowerSpectrogram { frames, bins, data })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_grid() {
        let spec = FrameSpec::default();
        spec.validate().unwrap();
        assert_eq!(spec.hop(), 160);
        assert_eq!(spec.win_length(), 400);
        assert_eq!(spec.num_frames(16_000), 101);
        assert_eq!(spec.num_bins(), 257);
    }

    #[test]
    fn rejects_bad_specs() {
        assert!(FrameSpec { sample_rate: 16_050, ..FrameSpec::default() }.validate().is_err());
        assert!(FrameSpec { fft_size: 256, ..FrameSpec::default() }.validate().is_err());
        assert!(FrameSpec { win_s: 0.005, ..FrameSpec::default() }.validate().is_err());
    }

    #[test]
    fn parseval_on_interior_frame() {
        let spec = FrameSpec::default();
        let stft = Stft::new(spec).unwrap();
        let x: Vec<f32> = (0..4000).map(|i| libm::sinf(i as f32 * 0.05) * 0.3).collect();
        let p = stft.power(&x).unwrap();
        let t = 10;
        let win = spec.win_length();
        let start = t * spec.hop() - win / 2;
        let energy: f64 = (0..win)
            .map(|i| {
                let w = 0.5 - 0.5 * libm::cos(2.0 * PI * i as f64 / win as f64);
                let v = w * f64::from(x[start + i]);
                v * v
            })
            .sum();
        let row = p.row(t);
        let nfft = spec.fft_size;
        let total: f64 = row[0] + row[nfft / 2] + 2.0 * row[1..nfft / 2].iter().sum::<f64>();
        assert!((total / nfft as f64 - energy).abs() < 1e-9 * energy.max(1.0));
    }
}
