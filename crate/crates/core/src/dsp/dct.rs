use alloc::vec::Vec;
use core::f64::consts::PI;

/// Orthonormal type-II DCT (forward) and its transpose, the type-III DCT
/// (inverse).
#[derive(Debug, Clone)]
pub struct Dct {
    n: usize,
    basis: Vec<f64>,
}

impl Dct {
    pub fn new(n: usize) -> Self {
        let mut basis = Vec::with_capacity(n * n);
        for k in 0..n {
            let scale = if k == 0 { libm::sqrt(1.0 / n as f64) } else { libm::sqrt(2.0 / n as f64) };
            for i in 0..n {
                basis.push(scale * libm::cos(PI * k as f64 * (2 * i + 1) as f64 / (2 * n) as f64));
            }
        }
        Self { n, basis }
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn forward(&self, x: &[f64], out: &mut [f64]) {
        for (k, o) in out.iter_mut().enumerate().take(self.n) {
            *o = self.basis[k * self.n..(k + 1) * self.n].iter().zip(x).map(|(b, v)| b * v).sum();
        }
    }

    pub fn inverse(&self, c: &[f64], out: &mut [f64]) {
        for (i, o) in out.iter_mut().enumerate().take(self.n) {
            *o = (0..self.n).map(|k| self.basis[k * self.n + i] * c[k]).sum();
        }
    }
}
