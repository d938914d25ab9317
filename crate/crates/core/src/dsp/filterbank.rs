use alloc::vec;
use alloc::vec::Vec;

pub fn hz_to_mel(hz: f64) -> f64 {
    2595.0 * libm::log10(1.0 + hz / 700.0)
}

pub fn mel_to_hz(mel: f64) -> f64 {
    700.0 * (libm::pow(10.0, mel / 2595.0) - 1.0)
}

/// Traunmüller's Bark approximation.
pub fn hz_to_bark(hz: f64) -> f64 {
    26.81 * hz / (1960.0 + hz) - 0.53
}

pub fn bark_to_hz(bark: f64) -> f64 {
    1960.0 * (bark + 0.53) / (26.28 - bark)
}

/// Bank of triangular filters whose peaks sit on the given centre
/// frequencies and whose feet sit on the neighbouring centres. The first and
/// last filters are half triangles, so inside `[centers[0], centers[last]]`
/// the weights of every FFT bin sum to one.
#[derive(Debug, Clone)]
pub struct Filterbank {
    centers_hz: Vec<f64>,
    bins: usize,
    weights: Vec<f64>,
    sums: Vec<f64>,
}

impl Filterbank {
    pub fn from_centers(centers_hz: &[f64], sample_rate: u32, fft_size: usize) -> Self {
        let bins = fft_size / 2 + 1;
        let nb = centers_hz.len();
        let mut weights = vec![0.0; nb * bins];
        for k in 0..bins {
            let f = k as f64 * f64::from(sample_rate) / fft_size as f64;
            for b in 0..nb {
                let c = centers_hz[b];
                let w = if f <= c {
                    match b.checked_sub(1) {
                        Some(l) if f > centers_hz[l] => (f - centers_hz[l]) / (c - centers_hz[l]),
                        _ if f == c => 1.0,
                        _ => 0.0,
                    }
                } else if b + 1 < nb && f < centers_hz[b + 1] {
                    (centers_hz[b + 1] - f) / (centers_hz[b + 1] - c)
                } else {
                    0.0
                };
                weights[b * bins + k] = w;
            }
        }
        let sums = (0..nb).map(|b| weights[b * bins..(b + 1) * bins].iter().sum()).collect();
        Self { centers_hz: centers_hz.to_vec(), bins, weights, sums }
    }

    /// `n` filters with centres evenly spaced on the mel scale over `[0, sr/2]`.
    pub fn mel(n: usize, sample_rate: u32, fft_size: usize) -> Self {
        let top = hz_to_mel(f64::from(sample_rate) / 2.0);
        let mut centers: Vec<f64> = (0..n).map(|i| mel_to_hz(top * i as f64 / (n - 1) as f64)).collect();
        pin_ends(&mut centers, sample_rate);
        Self::from_centers(&centers, sample_rate, fft_size)
    }

    /// `n` filters with centres evenly spaced on the Bark scale over `[0, sr/2]`.
    pub fn bark(n: usize, sample_rate: u32, fft_size: usize) -> Self {
        let lo = hz_to_bark(0.0);
        let hi = hz_to_bark(f64::from(sample_rate) / 2.0);
        let mut centers: Vec<f64> =
            (0..n).map(|i| bark_to_hz(lo + (hi - lo) * i as f64 / (n - 1) as f64)).collect();
        pin_ends(&mut centers, sample_rate);
        Self::from_centers(&centers, sample_rate, fft_size)
    }

    pub fn len(&self) -> usize {
        self.centers_hz.len()
    }

    pub fn is_empty(&self) -> bool {
        self.centers_hz.is_empty()
    }

    pub fn bins(&self) -> usize {
        self.bins
    }

    pub fn centers_hz(&self) -> &[f64] {
        &self.centers_hz
    }

    pub fn filter(&self, b: usize) -> &[f64] {
        &self.weights[b * self.bins..(b + 1) * self.bins]
    }

    pub fn weight_sums(&self) -> &[f64] {
        &self.sums
    }

    /// Band energies `E_b = sum_k w_b(k) P(k)`.
    pub fn apply(&self, power: &[f64], out: &mut [f64]) {
        for (b, o) in out.iter_mut().enumerate() {
            *o = self.filter(b).iter().zip(power).map(|(w, p)| w * p).sum();
        }
    }

    /// Piecewise-linear interpolation of per-band values back onto FFT bins.
    pub fn interpolate(&self, values: &[f64], out: &mut [f64]) {
        out.iter_mut().for_each(|o| *o = 0.0);
        for (b, v) in values.iter().enumerate() {
            for (o, w) in out.iter_mut().zip(self.filter(b)) {
                *o += w * v;
            }
        }
    }
}

/// Scale round trips are inexact; the outer centres must land on 0 and Nyquist.
fn pin_ends(centers: &mut [f64], sample_rate: u32) {
    if let Some(first) = centers.first_mut() {
        *first = 0.0;
    }
    if let Some(last) = centers.last_mut() {
        *last = f64::from(sample_rate) / 2.0;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn scale_round_trips() {
        for hz in [0.0, 100.0, 1000.0, 7999.0] {
            assert!((mel_to_hz(hz_to_mel(hz)) - hz).abs() < 1e-6);
            assert!((bark_to_hz(hz_to_bark(hz)) - hz).abs() < 1e-6);
        }
    }

    #[test]
    fn partition_of_unity_and_coverage() {
        for fb in [Filterbank::mel(80, 16_000, 512), Filterbank::bark(30, 16_000, 512)] {
            for w in fb.centers_hz().windows(2) {
                assert!(w[1] > w[0]);
            }
            for k in 0..fb.bins() {
                let total: f64 = (0..fb.len()).map(|b| fb.filter(b)[k]).sum();
                assert!((total - 1.0).abs() < 1e-9, "bin {k}: {total}");
            }
            assert!(fb.weight_sums().iter().all(|&s| s > 0.0));
        }
    }
}
