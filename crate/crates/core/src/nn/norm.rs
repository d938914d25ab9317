use alloc::vec;
use alloc::vec::Vec;

use super::param::{Module, Param};

/// Per-channel normalisation over all positions of one sequence, followed
/// by a learned scale and shift.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelNorm {
    pub channels: usize,
    pub gamma: Param,
    pub beta: Param,
}

#[derive(Debug, Clone)]
pub struct ChannelNormCache {
    xhat: Vec<f32>,
    inv_std: Vec<f32>,
}

const EPS: f32 = 1e-5;

impl ChannelNorm {
    pub fn new(channels: usize) -> Self {
        Self { channels, gamma: Param::filled(channels, 1.0), beta: Param::zeros(channels) }
    }

    /// Normalises `data` (rows of `channels` values) in place.
    pub fn forward(&self, data: &mut [f32]) -> ChannelNormCache {
        let c = self.channels;
        let n = (data.len() / c).max(1) as f32;
        let mut mean = vec![0.0f32; c];
        let mut var = vec![0.0f32; c];
        for row in data.chunks_exact(c) {
            for (m, v) in mean.iter_mut().zip(row) {
                *m += v;
            }
        }
        mean.iter_mut().for_each(|m| *m /= n);
        for row in data.chunks_exact(c) {
            for j in 0..c {
                let d = row[j] - mean[j];
                var[j] += d * d;
            }
        }
        let inv_std: Vec<f32> = var.iter().map(|v| 1.0 / libm::sqrtf(v / n + EPS)).collect();
        let mut xhat = vec![0.0; data.len()];
        for (row, xr) in data.chunks_exact_mut(c).zip(xhat.chunks_exact_mut(c)) {
            for j in 0..c {
                xr[j] = (row[j] - mean[j]) * inv_std[j];
                row[j] = self.gamma.value[j] * xr[j] + self.beta.value[j];
            }
        }
        ChannelNormCache { xhat, inv_std }
    }

    /// Replaces `grad` (w.r.t. the output) with the gradient w.r.t. the input.
    pub fn backward(&mut self, cache: &ChannelNormCache, grad: &mut [f32]) {
        let c = self.channels;
        let n = (grad.len() / c).max(1) as f32;
        let mut sum_dxhat = vec![0.0f32; c];
        let mut sum_dxhat_xhat = vec![0.0f32; c];
        for (g, xh) in grad.chunks_exact(c).zip(cache.xhat.chunks_exact(c)) {
            for j in 0..c {
                self.gamma.grad[j] += g[j] * xh[j];
                self.beta.grad[j] += g[j];
                let dxhat = g[j] * self.gamma.value[j];
                sum_dxhat[j] += dxhat;
                sum_dxhat_xhat[j] += dxhat * xh[j];
            }
        }
        for (g, xh) in grad.chunks_exact_mut(c).zip(cache.xhat.chunks_exact(c)) {
            for j in 0..c {
                let dxhat = g[j] * self.gamma.value[j];
                g[j] = cache.inv_std[j] / n * (n * dxhat - sum_dxhat[j] - xh[j] * sum_dxhat_xhat[j]);
            }
        }
    }
}

impl Module for ChannelNorm {
    fn visit(&self, f: &mut dyn FnMut(&str, &Param)) {
        f("gamma", &self.gamma);
        f("beta", &self.beta);
    }

    fn visit_mut(&mut self, f: &mut dyn FnMut(&str, &mut Param)) {
        f("gamma", &mut self.gamma);
        f("beta", &mut self.beta);
    }
}
