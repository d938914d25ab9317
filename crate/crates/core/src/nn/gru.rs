use alloc::vec;
use alloc::vec::Vec;

use super::gemm::matmul;
use super::ops::{accumulate_colsum, add_bias, sigmoid, tanh};
use super::param::{visit_child, visit_child_mut, Module, Param};
use super::Rng;
use crate::matrix::Matrix;

/// Gated recurrent unit, gates ordered `[reset, update, candidate]`:
///
/// ```text
/// r = sigmoid(W_ir x + b_ir + W_hr h + b_hr)
/// z = sigmoid(W_iz x + b_iz + W_hz h + b_hz)
/// n = tanh(W_in x + b_in + r * (W_hn h + b_hn))
/// h' = (1 - z) * n + z * h
/// ```
///
/// Starts from `h = 0`, so every output lies strictly inside `(-1, 1)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Gru {
    pub input: usize,
    pub hidden: usize,
    pub reverse: bool,
    pub w_ih: Param,
    pub b_ih: Param,
    pub w_hh: Param,
    pub b_hh: Param,
}

#[derive(Debug, Clone)]
pub struct GruCache {
    x: Matrix,
    h_prev: Vec<f32>,
    r: Vec<f32>,
    z: Vec<f32>,
    n: Vec<f32>,
    ghn: Vec<f32>,
}

impl Gru {
    pub fn new(input: usize, hidden: usize, reverse: bool, rng: &mut Rng) -> Self {
        let g = 3 * hidden;
        Self {
            input,
            hidden,
            reverse,
            w_ih: Param::fan_in(input * g, hidden, rng),
            b_ih: Param::fan_in(g, hidden, rng),
            w_hh: Param::fan_in(hidden * g, hidden, rng),
            b_hh: Param::fan_in(g, hidden, rng),
        }
    }

    fn steps(&self, t_len: usize) -> impl Iterator<Item = usize> {
        let rev = self.reverse;
        (0..t_len).map(move |s| if rev { t_len - 1 - s } else { s })
    }

    pub fn forward(&self, x: &Matrix) -> (Matrix, GruCache) {
        assert_eq!(x.cols(), self.input, "gru input width");
        let (t_len, h) = (x.rows(), self.hidden);
        let g = 3 * h;
        let mut gi = vec![0.0; t_len * g];
        matmul(t_len, self.input, g, x.as_slice(), false, &self.w_ih.value, false, 0.0, &mut gi);
        add_bias(&mut gi, g, &self.b_ih.value);

        let mut out = Matrix::zeros(t_len, h);
        let mut cache = GruCache {
            x: x.clone(),
            h_prev: vec![0.0; t_len * h],
            r: vec![0.0; t_len * h],
            z: vec![0.0; t_len * h],
            n: vec![0.0; t_len * h],
            ghn: vec![0.0; t_len * h],
        };
        let mut state = vec![0.0f32; h];
        let mut gh = vec![0.0f32; g];
        for t in self.steps(t_len) {
            gh.copy_from_slice(&self.b_hh.value);
            for (i, &hv) in state.iter().enumerate() {
                if hv != 0.0 {
                    for (acc, w) in gh.iter_mut().zip(&self.w_hh.value[i * g..(i + 1) * g]) {
                        *acc += hv * w;
                    }
                }
            }
            let gi_t = &gi[t * g..(t + 1) * g];
            let base = t * h;
            cache.h_prev[base..base + h].copy_from_slice(&state);
            for j in 0..h {
                let r = sigmoid(gi_t[j] + gh[j]);
                let z = sigmoid(gi_t[h + j] + gh[h + j]);
                let n = tanh(gi_t[2 * h + j] + r * gh[2 * h + j]);
                cache.r[base + j] = r;
                cache.z[base + j] = z;
                cache.n[base + j] = n;
                cache.ghn[base + j] = gh[2 * h + j];
                state[j] = (1.0 - z) * n + z * state[j];
            }
            out.row_mut(t).copy_from_slice(&state);
        }
        (out, cache)
    }

    pub fn backward(&mut self, cache: &GruCache, dy: &Matrix, need_dx: bool) -> Option<Matrix> {
        let (t_len, h) = (dy.rows(), self.hidden);
        let g = 3 * h;
        let mut dgi = vec![0.0f32; t_len * g];
        let mut dgh = vec![0.0f32; t_len * g];
        let mut dh_next = vec![0.0f32; h];
        let order: Vec<usize> = self.steps(t_len).collect();
        for &t in order.iter().rev() {
            let base = t * h;
            let mut dh_prev = vec![0.0f32; h];
            for j in 0..h {
                let dh = dy.get(t, j) + dh_next[j];
                let (r, z, n) = (cache.r[base + j], cache.z[base + j], cache.n[base + j]);
                let hp = cache.h_prev[base + j];
                let dn_pre = dh * (1.0 - z) * (1.0 - n * n);
                let dz_pre = dh * (hp - n) * z * (1.0 - z);
                let dr_pre = dn_pre * cache.ghn[base + j] * r * (1.0 - r);
                dh_prev[j] = dh * z;
                let gi_t = &mut dgi[t * g..(t + 1) * g];
                gi_t[j] = dr_pre;
                gi_t[h + j] = dz_pre;
                gi_t[2 * h + j] = dn_pre;
                let gh_t = &mut dgh[t * g..(t + 1) * g];
                gh_t[j] = dr_pre;
                gh_t[h + j] = dz_pre;
                gh_t[2 * h + j] = dn_pre * r;
            }
            let gh_t = &dgh[t * g..(t + 1) * g];
            for (i, d) in dh_prev.iter_mut().enumerate() {
                *d += self.w_hh.value[i * g..(i + 1) * g].iter().zip(gh_t).map(|(w, v)| w * v).sum::<f32>();
            }
            dh_next = dh_prev;
        }
        matmul(h, t_len, g, &cache.h_prev, true, &dgh, false, 1.0, &mut self.w_hh.grad);
        accumulate_colsum(&dgh, g, &mut self.b_hh.grad);
        matmul(self.input, t_len, g, cache.x.as_slice(), true, &dgi, false, 1.0, &mut self.w_ih.grad);
        accumulate_colsum(&dgi, g, &mut self.b_ih.grad);
        need_dx.then(|| {
            let mut dx = Matrix::zeros(t_len, self.input);
            matmul(t_len, g, self.input, &dgi, false, &self.w_ih.value, true, 0.0, dx.as_mut_slice());
            dx
        })
    }
}

impl Module for Gru {
    fn visit(&self, f: &mut dyn FnMut(&str, &Param)) {
        f("w_ih", &self.w_ih);
        f("b_ih", &self.b_ih);
        f("w_hh", &self.w_hh);
        f("b_hh", &self.b_hh);
    }

    fn visit_mut(&mut self, f: &mut dyn FnMut(&str, &mut Param)) {
        f("w_ih", &mut self.w_ih);
        f("b_ih", &mut self.b_ih);
        f("w_hh", &mut self.w_hh);
        f("b_hh", &mut self.b_hh);
    }
}

/// Forward and backward GRUs over the same input, outputs concatenated
/// `[forward | backward]`.
#[derive(Debug, Clone, PartialEq)]
pub struct BiGru {
    pub fwd: Gru,
    pub bwd: Gru,
}

#[derive(Debug, Clone)]
pub struct BiGruCache {
    fwd: GruCache,
    bwd: GruCache,
}

impl BiGru {
    pub fn new(input: usize, hidden: usize, rng: &mut Rng) -> Self {
        let fwd = Gru::new(input, hidden, false, rng);
        let bwd = Gru::new(input, hidden, true, rng);
        Self { fwd, bwd }
    }

    pub fn out_dim(&self) -> usize {
        self.fwd.hidden + self.bwd.hidden
    }

    pub fn forward(&self, x: &Matrix) -> (Matrix, BiGruCache) {
        let (yf, cf) = self.fwd.forward(x);
        let (yb, cb) = self.bwd.forward(x);
        (Matrix::hconcat(&[&yf, &yb]).expect("equal lengths"), BiGruCache { fwd: cf, bwd: cb })
    }

    pub fn backward(&mut self, cache: &BiGruCache, dy: &Matrix, need_dx: bool) -> Option<Matrix> {
        let h = self.fwd.hidden;
        let dyf = dy.columns(0, h);
        let dyb = dy.columns(h, dy.cols());
        let dxf = self.fwd.backward(&cache.fwd, &dyf, need_dx);
        let dxb = self.bwd.backward(&cache.bwd, &dyb, need_dx);
        match (dxf, dxb) {
            (Some(mut a), Some(b)) => {
                a.as_mut_slice().iter_mut().zip(b.as_slice()).for_each(|(x, y)| *x += y);
                Some(a)
            }
            _ => None,
        }
    }
}

impl Module for BiGru {
    fn visit(&self, f: &mut dyn FnMut(&str, &Param)) {
        visit_child("fwd", &self.fwd, f);
        visit_child("bwd", &self.bwd, f);
    }

    fn visit_mut(&mut self, f: &mut dyn FnMut(&str, &mut Param)) {
        visit_child_mut("fwd", &mut self.fwd, f);
        visit_child_mut("bwd", &mut self.bwd, f);
    }
}
