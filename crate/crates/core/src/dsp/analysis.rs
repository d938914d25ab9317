use alloc::vec;
use alloc::vec::Vec;

use super::dct::Dct;
use super::filterbank::Filterbank;
use super::frame::{FrameSpec, PowerSpectrogram, Stft};
use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::waveform::Waveform;

pub const MEL_DIM: usize = 80;
pub const BFCC_DIM: usize = 30;
/// Energy floor applied before every logarithm.
pub const LOG_FLOOR: f64 = 1e-10;

/// `T x 80` log mel power spectrogram.
#[derive(Debug, Clone, PartialEq)]
pub struct MelSpectrogram {
    values: Matrix,
}

impl MelSpectrogram {
    pub fn new(values: Matrix) -> Result<Self> {
        if values.cols() != MEL_DIM {
            return Err(Error::DimMismatch { what: "mel spectrogram", expected: MEL_DIM, got: values.cols() });
        }
        Ok(Self { values })
    }

    pub fn frames(&self) -> usize {
        self.values.rows()
    }

    pub fn values(&self) -> &Matrix {
        &self.values
    }

    pub fn into_matrix(self) -> Matrix {
        self.values
    }
}

/// Reusable analysis front end: one STFT feeding the mel and Bark banks.
#[derive(Debug, Clone)]
pub struct Analyzer {
    spec: FrameSpec,
    stft: Stft,
    mel: Filterbank,
    bark: Filterbank,
    dct: Dct,
}

impl Analyzer {
    pub fn new(spec: FrameSpec) -> Result<Self> {
        let stft = Stft::new(spec)?;
        Ok(Self {
            spec,
            stft,
            mel: Filterbank::mel(MEL_DIM, spec.sample_rate, spec.fft_size),
            bark: Filterbank::bark(BFCC_DIM, spec.sample_rate, spec.fft_size),
            dct: Dct::new(BFCC_DIM),
        })
    }

    pub fn spec(&self) -> &FrameSpec {
        &self.spec
    }

    pub fn mel_filterbank(&self) -> &Filterbank {
        &self.mel
    }

    pub fn bark_filterbank(&self) -> &Filterbank {
        &self.bark
    }

    pub fn dct(&self) -> &Dct {
        &self.dct
    }

    fn power(&self, wave: &Waveform) -> Result<PowerSpectrogram> {
        if wave.sample_rate != self.spec.sample_rate {
            return Err(Error::InvalidConfig(alloc::format!(
                "waveform sample rate {} differs from analysis rate {}",
                wave.sample_rate,
                self.spec.sample_rate
            )));
        }
        self.stft.power(&wave.samples)
    }

    fn log_bank(&self, power: &PowerSpectrogram, bank: &Filterbank) -> Matrix {
        let mut out = Matrix::zeros(power.frames, bank.len());
        let mut e = vec![0.0; bank.len()];
        for t in 0..power.frames {
            bank.apply(power.row(t), &mut e);
            for (o, v) in out.row_mut(t).iter_mut().zip(&e) {
                *o = libm::log(v.max(LOG_FLOOR)) as f32;
            }
        }
        out
    }

    fn cepstra(&self, log_energies: &Matrix) -> Matrix {
        let mut out = Matrix::zeros(log_energies.rows(), BFCC_DIM);
        let mut x = vec![0.0; BFCC_DIM];
        let mut c = vec![0.0; BFCC_DIM];
        for t in 0..log_energies.rows() {
            for (xi, &v) in x.iter_mut().zip(log_energies.row(t)) {
                *xi = f64::from(v);
            }
            self.dct.forward(&x, &mut c);
            for (o, v) in out.row_mut(t).iter_mut().zip(&c) {
                *o = *v as f32;
            }
        }
        out
    }

    pub fn mel(&self, wave: &Waveform) -> Result<MelSpectrogram> {
        let power = self.power(wave)?;
        MelSpectrogram::new(self.log_bank(&power, &self.mel))
    }

    /// Natural-log energies of the 30 Bark bands, `T x 30`.
    pub fn band_log_energies(&self, wave: &Waveform) -> Result<Matrix> {
        let power = self.power(wave)?;
        Ok(self.log_bank(&power, &self.bark))
    }

    /// `T x 30` Bark-frequency cepstral coefficients.
    pub fn bfcc(&self, wave: &Waveform) -> Result<Matrix> {
        Ok(self.cepstra(&self.band_log_energies(wave)?))
    }

    /// Mel spectrogram and BFCCs from a single STFT pass.
    pub fn mel_and_bfcc(&self, wave: &Waveform) -> Result<(MelSpectrogram, Matrix)> {
        let power = self.power(wave)?;
        let mel = MelSpectrogram::new(self.log_bank(&power, &self.mel))?;
        let bfcc = self.cepstra(&self.log_bank(&power, &self.bark));
        Ok((mel, bfcc))
    }

    /// Inverse DCT of one BFCC frame back to band log energies.
    pub fn bfcc_to_band_log_energies(&self, frame: &[f32]) -> Vec<f64> {
        let c: Vec<f64> = frame.iter().map(|&v| f64::from(v)).collect();
        let mut out = vec![0.0; BFCC_DIM];
        self.dct.inverse(&c, &mut out);
        out
    }
}

pub fn stft_mel(wave: &Waveform, spec: &FrameSpec) -> Result<MelSpectrogram> {
    Analyzer::new(*spec)?.mel(wave)
}

pub fn bfcc(wave: &Waveform, spec: &FrameSpec) -> Result<Matrix> {
    Analyzer::new(*spec)?.bfcc(wave)
}
