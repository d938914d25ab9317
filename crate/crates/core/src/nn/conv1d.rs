use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use super::gemm::{matmul, sgemm};
use super::ops::{accumulate_colsum, add_bias, relu_backward, relu_inplace};
use super::param::{visit_child, visit_child_mut, Module, Param};
use super::Rng;
use crate::matrix::Matrix;

/// Unfolds `x` (`T x C`) into `T x (width*C)` rows of time-shifted frames,
/// offsets `-pad_left .. width-pad_left`, zero outside the sequence.
fn im2col(x: &Matrix, width: usize, pad_left: usize) -> Vec<f32> {
    let (t_len, c) = (x.rows(), x.cols());
    let mut cols = vec![0.0; t_len * width * c];
    for t in 0..t_len {
        let row = &mut cols[t * width * c..(t + 1) * width * c];
        for j in 0..width {
            let src = t as isize + j as isize - pad_left as isize;
            if src >= 0 && (src as usize) < t_len {
                row[j * c..(j + 1) * c].copy_from_slice(x.row(src as usize));
            }
        }
    }
    cols
}

fn col2im(dcols: &[f32], t_len: usize, c: usize, width: usize, pad_left: usize) -> Matrix {
    let mut dx = Matrix::zeros(t_len, c);
    for t in 0..t_len {
        let row = &dcols[t * width * c..(t + 1) * width * c];
        for j in 0..width {
            let src = t as isize + j as isize - pad_left as isize;
            if src >= 0 && (src as usize) < t_len {
                for (d, g) in dx.row_mut(src as usize).iter_mut().zip(&row[j * c..(j + 1) * c]) {
                    *d += g;
                }
            }
        }
    }
    dx
}

/// 1-D convolution over time, stride 1, "same" padding
/// (`(width-1)/2` frames on the left).
#[derive(Debug, Clone, PartialEq)]
pub struct Conv1d {
    pub width: usize,
    pub in_dim: usize,
    pub out_dim: usize,
    pub w: Param,
    pub b: Param,
}

impl Conv1d {
    pub fn new(width: usize, in_dim: usize, out_dim: usize, rng: &mut Rng) -> Self {
        let fan_in = width * in_dim;
        Self {
            width,
            in_dim,
            out_dim,
            w: Param::fan_in(fan_in * out_dim, fan_in, rng),
            b: Param::fan_in(out_dim, fan_in, rng),
        }
    }

    fn pad_left(&self) -> usize {
        (self.width - 1) / 2
    }

    /// Returns the output and the unfolded input needed by `backward`.
    pub fn forward(&self, x: &Matrix) -> (Matrix, Vec<f32>) {
        assert_eq!(x.cols(), self.in_dim, "conv1d input width");
        let cols = im2col(x, self.width, self.pad_left());
        let mut y = Matrix::zeros(x.rows(), self.out_dim);
        let k = self.width * self.in_dim;
        matmul(x.rows(), k, self.out_dim, &cols, false, &self.w.value, false, 0.0, y.as_mut_slice());
        add_bias(y.as_mut_slice(), self.out_dim, &self.b.value);
        (y, cols)
    }

    pub fn backward(&mut self, cols: &[f32], dy: &Matrix, need_dx: bool) -> Option<Matrix> {
        let t_len = dy.rows();
        let k = self.width * self.in_dim;
        matmul(k, t_len, self.out_dim, cols, true, dy.as_slice(), false, 1.0, &mut self.w.grad);
        accumulate_colsum(dy.as_slice(), self.out_dim, &mut self.b.grad);
        need_dx.then(|| {
            let mut dcols = vec![0.0; t_len * k];
            matmul(t_len, self.out_dim, k, dy.as_slice(), false, &self.w.value, true, 0.0, &mut dcols);
            col2im(&dcols, t_len, self.in_dim, self.width, self.pad_left())
        })
    }
}

impl Module for Conv1d {
    fn visit(&self, f: &mut dyn FnMut(&str, &Param)) {
        f("w", &self.w);
        f("b", &self.b);
    }

    fn visit_mut(&mut self, f: &mut dyn FnMut(&str, &mut Param)) {
        f("w", &mut self.w);
        f("b", &mut self.b);
    }
}

/// Bank of `K` ReLU convolution sets; set `k` (1-based) has width `k`.
/// Outputs are concatenated along channels, `T x (K * filters)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvBank {
    pub sets: Vec<Conv1d>,
    pub in_dim: usize,
    pub filters: usize,
}

#[derive(Debug, Clone)]
pub struct ConvBankCache {
    cols: Vec<f32>,
    out: Matrix,
}

impl ConvBank {
    pub fn new(k: usize, in_dim: usize, filters: usize, rng: &mut Rng) -> Self {
        let sets = (1..=k).map(|w| Conv1d::new(w, in_dim, filters, rng)).collect();
        Self { sets, in_dim, filters }
    }

    pub fn out_dim(&self) -> usize {
        self.sets.len() * self.filters
    }

    fn max_width(&self) -> usize {
        self.sets.len()
    }

    /// Column offset of set `w`'s window inside the shared unfolding.
    fn col_offset(&self, width: usize) -> usize {
        ((self.max_width() - 1) / 2 - (width - 1) / 2) * self.in_dim
    }

    pub fn forward(&self, x: &Matrix) -> (Matrix, ConvBankCache) {
        assert_eq!(x.cols(), self.in_dim, "conv bank input width");
        let kmax = self.max_width();
        let t_len = x.rows();
        let stride = kmax * self.in_dim;
        let cols = im2col(x, kmax, (kmax - 1) / 2);
        let out_dim = self.out_dim();
        let mut y = Matrix::zeros(t_len, out_dim);
        for (s, conv) in self.sets.iter().enumerate() {
            let off = self.col_offset(conv.width);
            let k = conv.width * self.in_dim;
            let ys = &mut y.as_mut_slice()[s * self.filters..];
            sgemm(t_len, k, self.filters, &cols[off..], stride, 1, &conv.w.value, self.filters, 1, 0.0, ys, out_dim, 1);
            for t in 0..t_len {
                for (v, b) in ys[t * out_dim..t * out_dim + self.filters].iter_mut().zip(&conv.b.value) {
                    *v += b;
                }
            }
        }
        relu_inplace(y.as_mut_slice());
        (y.clone(), ConvBankCache { cols, out: y })
    }

    pub fn backward(&mut self, cache: &ConvBankCache, dy: &Matrix, need_dx: bool) -> Option<Matrix> {
        let kmax = self.max_width();
        let t_len = dy.rows();
        let stride = kmax * self.in_dim;
        let out_dim = self.out_dim();
        let mut g = dy.clone();
        relu_backward(cache.out.as_slice(), g.as_mut_slice());
        let mut dcols = if need_dx { vec![0.0; t_len * stride] } else { Vec::new() };
        let filters = self.filters;
        for s in 0..self.sets.len() {
            let off = self.col_offset(self.sets[s].width);
            let conv = &mut self.sets[s];
            let k = conv.width * self.in_dim;
            let gs = &g.as_slice()[s * filters..];
            // dW (k x F) += cols_sub^T (k x T) * g_s (T x F)
            sgemm(k, t_len, filters, &cache.cols[off..], 1, stride, gs, out_dim, 1, 1.0, &mut conv.w.grad, filters, 1);
            for t in 0..t_len {
                for (db, v) in conv.b.grad.iter_mut().zip(&gs[t * out_dim..t * out_dim + filters]) {
                    *db += v;
                }
            }
            if need_dx {
                // dcols_sub (T x k) += g_s (T x F) * W^T (F x k)
                sgemm(t_len, filters, k, gs, out_dim, 1, &conv.w.value, 1, filters, 1.0, &mut dcols[off..], stride, 1);
            }
        }
        need_dx.then(|| col2im(&dcols, t_len, self.in_dim, kmax, (kmax - 1) / 2))
    }
}

impl Module for ConvBank {
    fn visit(&self, f: &mut dyn FnMut(&str, &Param)) {
        for (i, s) in self.sets.iter().enumerate() {
            visit_child(&format!("k{}", i + 1), s, f);
        }
    }

    fn visit_mut(&mut self, f: &mut dyn FnMut(&str, &mut Param)) {
        for (i, s) in self.sets.iter_mut().enumerate() {
            visit_child_mut(&format!("k{}", i + 1), s, f);
        }
    }
}
