use alloc::vec;
use alloc::vec::Vec;

use super::analysis::BFCC_DIM;
use super::dct::Dct;
use super::fft::Fft;
use super::filterbank::Filterbank;
use super::frame::{FrameSpec, Stft};
use crate::error::{Error, Result};

pub const LPC_ORDER: usize = 16;

/// All-pole model `x[n] = sum_i coeffs[i] x[n-1-i] + gain e[n]`.
#[derive(Debug, Clone, PartialEq)]
pub struct LpcCoefficients {
    pub coeffs: Vec<f64>,
    pub reflection: Vec<f64>,
    pub gain: f64,
}

impl LpcCoefficients {
    pub fn order(&self) -> usize {
        self.coeffs.len()
    }

    /// Squared magnitude of the synthesis filter `gain / A(e^{jw})` at `freq_hz`.
    pub fn envelope_power(&self, freq_hz: f64, sample_rate: u32) -> f64 {
        let w = 2.0 * core::f64::consts::PI * freq_hz / f64::from(sample_rate);
        let (mut re, mut im) = (1.0, 0.0);
        for (i, a) in self.coeffs.iter().enumerate() {
            let ang = w * (i + 1) as f64;
            re -= a * libm::cos(ang);
            im += a * libm::sin(ang);
        }
        self.gain * self.gain / (re * re + im * im)
    }
}

/// Biased autocorrelation `r[k] = sum_n x[n] x[n+k]` for `k = 0..=order`.
pub fn autocorrelation(x: &[f64], order: usize) -> Vec<f64> {
    (0..=order).map(|k| x.iter().zip(x.iter().skip(k)).map(|(a, b)| a * b).sum()).collect()
}

/// Levinson-Durbin recursion on `r[0..=p]`, giving the order-`p` forward
/// predictor. Rejects `r[0] <= 0` and any reflection coefficient with
/// `|k| >= 1` instead of clamping it.
pub fn levinson_durbin(r: &[f64]) -> Result<LpcCoefficients> {
    let r0 = *r.first().ok_or(Error::Empty("autocorrelation"))?;
    if !(r0 > 0.0) || !r0.is_finite() {
        return Err(Error::NonPositiveEnergy(r0));
    }
    let order = r.len() - 1;
    let mut a = vec![0.0; order];
    let mut prev = vec![0.0; order];
    let mut reflection = Vec::with_capacity(order);
    let mut err = r0;
    for i in 0..order {
        let mut acc = r[i + 1];
        for j in 0..i {
            acc -= a[j] * r[i - j];
        }
        let k = acc / err;
        if !(k.abs() < 1.0) {
            return Err(Error::UnstableReflection { index: i, magnitude: k.abs() });
        }
        prev[..i].copy_from_slice(&a[..i]);
        for j in 0..i {
            a[j] = prev[j] - k * prev[i - 1 - j];
        }
        a[i] = k;
        err *= 1.0 - k * k;
        reflection.push(k);
    }
    Ok(LpcCoefficients { coeffs: a, reflection, gain: libm::sqrt(err) })
}

/// Step-up recursion from reflection coefficients to predictor coefficients.
pub fn reflection_to_predictor(k: &[f64]) -> Vec<f64> {
    let mut a: Vec<f64> = Vec::with_capacity(k.len());
    for (i, &ki) in k.iter().enumerate() {
        let prev = a.clone();
        for j in 0..i {
            a[j] = prev[j] - ki * prev[i - 1 - j];
        }
        a.push(ki);
    }
    a
}

/// Converts BFCC frames to LPC: inverse DCT to Bark band log energies,
/// piecewise-linear interpolation to a power spectrum on the FFT bins,
/// inverse FFT to an autocorrelation, Levinson-Durbin at order 16.
///
/// The autocorrelation is scaled to per-sample power of the analysed frame,
/// so unit-variance excitation through `gain / A(z)` reproduces the frame
/// level.
#[derive(Debug, Clone)]
pub struct BfccToLpc {
    order: usize,
    dct: Dct,
    bark: Filterbank,
    fft: Fft,
    window_energy: f64,
}

/// Relative white-noise correction added to `r[0]`.
const NOISE_CORRECTION: f64 = 1e-9;

impl BfccToLpc {
    pub fn new(spec: FrameSpec) -> Result<Self> {
        let stft = Stft::new(spec)?;
        Ok(Self {
            order: LPC_ORDER,
            dct: Dct::new(BFCC_DIM),
            bark: Filterbank::bark(BFCC_DIM, spec.sample_rate, spec.fft_size),
            fft: Fft::new(spec.fft_size)?,
            window_energy: stft.window_energy(),
        })
    }

    pub fn order(&self) -> usize {
        self.order
    }

    /// Per-sample autocorrelation implied by a BFCC frame, lags `0..=order`.
    pub fn autocorrelation(&self, frame: &[f32]) -> Result<Vec<f64>> {
        if frame.len() != BFCC_DIM {
            return Err(Error::DimMismatch { what: "bfcc frame", expected: BFCC_DIM, got: frame.len() });
        }
        if frame.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite { what: "bfcc frame", step: 0 });
        }
        let c: Vec<f64> = frame.iter().map(|&v| f64::from(v)).collect();
        let mut log_e = vec![0.0; BFCC_DIM];
        self.dct.inverse(&c, &mut log_e);
        let density: Vec<f64> =
            log_e.iter().zip(self.bark.weight_sums()).map(|(&le, &s)| libm::exp(le) / s).collect();

        let n = self.fft.len();
        let half = n / 2;
        let mut spectrum = vec![0.0; half + 1];
        self.bark.interpolate(&density, &mut spectrum);
        let mut re = vec![0.0; n];
        let mut im = vec![0.0; n];
        for k in 0..=half {
            re[k] = spectrum[k];
            if k > 0 && k < half {
                re[n - k] = spectrum[k];
            }
        }
        self.fft.inverse(&mut re, &mut im);
        let mut r: Vec<f64> = re[..=self.order].iter().map(|v| v / self.window_energy).collect();
        r[0] *= 1.0 + NOISE_CORRECTION;
        Ok(r)
    }

    pub fn convert(&self, frame: &[f32]) -> Result<LpcCoefficients> {
        levinson_durbin(&self.autocorrelation(frame)?)
    }
}

pub fn bfcc_to_lpc(frame: &[f32], spec: &FrameSpec) -> Result<LpcCoefficients> {
    BfccToLpc::new(*spec)?.convert(frame)
}
