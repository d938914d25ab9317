use super::linear::Linear;
use super::ops::sigmoid;
use super::param::{visit_child, visit_child_mut, Module, Param};
use super::Rng;
use crate::matrix::Matrix;

/// `y = relu(x W_h + b_h) * g + x * (1 - g)`, `g = sigmoid(x W_g + b_g)`.
/// The gate bias starts at -1 so fresh layers mostly carry their input.
#[derive(Debug, Clone, PartialEq)]
pub struct Highway {
    pub transform: Linear,
    pub gate: Linear,
}

#[derive(Debug, Clone)]
pub struct HighwayCache {
    x: Matrix,
    h: Matrix,
    g: Matrix,
}

impl Highway {
    pub fn new(dim: usize, rng: &mut Rng) -> Self {
        let transform = Linear::new(dim, dim, rng);
        let mut gate = Linear::new(dim, dim, rng);
        gate.b.value.iter_mut().for_each(|b| *b = -1.0);
        Self { transform, gate }
    }

    pub fn forward(&self, x: &Matrix) -> (Matrix, HighwayCache) {
        let h = self.transform.forward(x).map(|v| v.max(0.0));
        let g = self.gate.forward(x).map(sigmoid);
        let mut y = x.clone();
        for ((yv, &hv), &gv) in y.as_mut_slice().iter_mut().zip(h.as_slice()).zip(g.as_slice()) {
            *yv = hv * gv + *yv * (1.0 - gv);
        }
        (y, HighwayCache { x: x.clone(), h, g })
    }

    pub fn backward(&mut self, cache: &HighwayCache, dy: &Matrix) -> Matrix {
        let n = dy.as_slice().len();
        let mut dh = Matrix::zeros(dy.rows(), dy.cols());
        let mut dg = Matrix::zeros(dy.rows(), dy.cols());
        let mut dx = Matrix::zeros(dy.rows(), dy.cols());
        let (x, h, g) = (cache.x.as_slice(), cache.h.as_slice(), cache.g.as_slice());
        for i in 0..n {
            let d = dy.as_slice()[i];
            dh.as_mut_slice()[i] = if h[i] > 0.0 { d * g[i] } else { 0.0 };
            dg.as_mut_slice()[i] = d * (h[i] - x[i]) * g[i] * (1.0 - g[i]);
            dx.as_mut_slice()[i] = d * (1.0 - g[i]);
        }
        let a = self.transform.backward(&cache.x, &dh, true).expect("dx requested");
        let b = self.gate.backward(&cache.x, &dg, true).expect("dx requested");
        for ((v, p), q) in dx.as_mut_slice().iter_mut().zip(a.as_slice()).zip(b.as_slice()) {
            *v += p + q;
        }
        dx
    }
}

impl Module for Highway {
    fn visit(&self, f: &mut dyn FnMut(&str, &Param)) {
        visit_child("h", &self.transform, f);
        visit_child("t", &self.gate, f);
    }

    fn visit_mut(&mut self, f: &mut dyn FnMut(&str, &mut Param)) {
        visit_child_mut("h", &mut self.transform, f);
        visit_child_mut("t", &mut self.gate, f);
    }
}
