use alloc::vec;
use alloc::vec::Vec;

use super::gemm::matmul;
use super::ops::{accumulate_colsum, add_bias};
use super::param::{Module, Param};
use super::Rng;

/// Time x frequency x channel activations, channel-fastest.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMap {
    pub time: usize,
    pub freq: usize,
    pub channels: usize,
    pub data: Vec<f32>,
}

impl FeatureMap {
    pub fn zeros(time: usize, freq: usize, channels: usize) -> Self {
        Self { time, freq, channels, data: vec![0.0; time * freq * channels] }
    }

    #[inline]
    pub fn index(&self, t: usize, f: usize, c: usize) -> usize {
        (t * self.freq + f) * self.channels + c
    }
}

/// 3x3 convolution with stride 1 along time and 2 along frequency, SAME
/// padding: time length is preserved and frequency becomes `ceil(F / 2)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Conv2d {
    pub in_channels: usize,
    pub out_channels: usize,
    pub w: Param,
    pub b: Param,
}

#[derive(Debug, Clone)]
pub struct Conv2dCache {
    cols: Vec<f32>,
    in_time: usize,
    in_freq: usize,
}

const KT: usize = 3;
const KF: usize = 3;
const STRIDE_F: usize = 2;

impl Conv2d {
    pub fn new(in_channels: usize, out_channels: usize, rng: &mut Rng) -> Self {
        let fan_in = KT * KF * in_channels;
        Self {
            in_channels,
            out_channels,
            w: Param::fan_in(fan_in * out_channels, fan_in, rng),
            b: Param::fan_in(out_channels, fan_in, rng),
        }
    }

    pub fn out_freq(in_freq: usize) -> usize {
        in_freq.div_ceil(STRIDE_F)
    }

    /// Leading frequency padding under the SAME rule.
    fn pad_f(in_freq: usize) -> usize {
        let out = Self::out_freq(in_freq);
        ((out - 1) * STRIDE_F + KF).saturating_sub(in_freq) / 2
    }

    /// For each output row and patch column, the input row it reads.
    fn for_each_tap(time: usize, in_freq: usize, mut f: impl FnMut(usize, usize, usize)) {
        let out_f = Self::out_freq(in_freq);
        let pad_f = Self::pad_f(in_freq) as isize;
        for t in 0..time {
            for fo in 0..out_f {
                let row = t * out_f + fo;
                for dt in 0..KT {
                    let ti = t as isize + dt as isize - 1;
                    if ti < 0 || ti as usize >= time {
                        continue;
                    }
                    for df in 0..KF {
                        let fi = (fo * STRIDE_F) as isize + df as isize - pad_f;
                        if fi < 0 || fi as usize >= in_freq {
                            continue;
                        }
                        f(row, dt * KF + df, ti as usize * in_freq + fi as usize);
                    }
                }
            }
        }
    }

    pub fn forward(&self, x: &FeatureMap) -> (FeatureMap, Conv2dCache) {
        assert_eq!(x.channels, self.in_channels, "conv2d input channels");
        let c = self.in_channels;
        let out_f = Self::out_freq(x.freq);
        let rows = x.time * out_f;
        let k = KT * KF * c;
        let mut cols = vec![0.0; rows * k];
        Self::for_each_tap(x.time, x.freq, |row, tap, src| {
            cols[row * k + tap * c..row * k + (tap + 1) * c].copy_from_slice(&x.data[src * c..(src + 1) * c]);
        });
        let mut y = FeatureMap::zeros(x.time, out_f, self.out_channels);
        matmul(rows, k, self.out_channels, &cols, false, &self.w.value, false, 0.0, &mut y.data);
        add_bias(&mut y.data, self.out_channels, &self.b.value);
        (y, Conv2dCache { cols, in_time: x.time, in_freq: x.freq })
    }

    pub fn backward(&mut self, cache: &Conv2dCache, dy: &FeatureMap, need_dx: bool) -> Option<FeatureMap> {
        let c = self.in_channels;
        let rows = dy.time * dy.freq;
        let k = KT * KF * c;
        matmul(k, rows, self.out_channels, &cache.cols, true, &dy.data, false, 1.0, &mut self.w.grad);
        accumulate_colsum(&dy.data, self.out_channels, &mut self.b.grad);
        need_dx.then(|| {
            let mut dcols = vec![0.0; rows * k];
            matmul(rows, self.out_channels, k, &dy.data, false, &self.w.value, true, 0.0, &mut dcols);
            let mut dx = FeatureMap::zeros(cache.in_time, cache.in_freq, c);
            Self::for_each_tap(cache.in_time, cache.in_freq, |row, tap, src| {
                for (d, g) in dx.data[src * c..(src + 1) * c].iter_mut().zip(&dcols[row * k + tap * c..]) {
                    *d += g;
                }
            });
            dx
        })
    }
}

impl Module for Conv2d {
    fn visit(&self, f: &mut dyn FnMut(&str, &Param)) {
        f("w", &self.w);
        f("b", &self.b);
    }

    fn visit_mut(&mut self, f: &mut dyn FnMut(&str, &mut Param)) {
        f("w", &mut self.w);
        f("b", &mut self.b);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn frequency_trace_under_ceil_division() {
        let mut f = 80;
        let mut trace = vec![f];
        for _ in 0..6 {
            f = Conv2d::out_freq(f);
            trace.push(f);
        }
        assert_eq!(trace, [80, 40, 20, 10, 5, 3, 2]);
        assert_eq!(Conv2d::pad_f(80), 0);
        assert_eq!(Conv2d::pad_f(5), 1);
    }
}
