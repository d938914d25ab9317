use super::gemm::matmul;
use super::ops::{accumulate_colsum, add_bias};
use super::param::{Module, Param};
use super::Rng;
use crate::matrix::Matrix;

/// `y = x W + b` with `W` stored `in x out`.
#[derive(Debug, Clone, PartialEq)]
pub struct Linear {
    pub in_dim: usize,
    pub out_dim: usize,
    pub w: Param,
    pub b: Param,
}

impl Linear {
    pub fn new(in_dim: usize, out_dim: usize, rng: &mut Rng) -> Self {
        let w = Param::fan_in(in_dim * out_dim, in_dim, rng);
        let b = Param::fan_in(out_dim, in_dim, rng);
        Self { in_dim, out_dim, w, b }
    }

    pub fn forward(&self, x: &Matrix) -> Matrix {
        assert_eq!(x.cols(), self.in_dim, "linear input width");
        let mut y = Matrix::zeros(x.rows(), self.out_dim);
        matmul(x.rows(), self.in_dim, self.out_dim, x.as_slice(), false, &self.w.value, false, 0.0, y.as_mut_slice());
        add_bias(y.as_mut_slice(), self.out_dim, &self.b.value);
        y
    }

    /// Accumulates parameter gradients; returns `dL/dx` when `need_dx`.
    pub fn backward(&mut self, x: &Matrix, dy: &Matrix, need_dx: bool) -> Option<Matrix> {
        let t = x.rows();
        matmul(self.in_dim, t, self.out_dim, x.as_slice(), true, dy.as_slice(), false, 1.0, &mut self.w.grad);
        accumulate_colsum(dy.as_slice(), self.out_dim, &mut self.b.grad);
        need_dx.then(|| {
            let mut dx = Matrix::zeros(t, self.in_dim);
            matmul(t, self.out_dim, self.in_dim, dy.as_slice(), false, &self.w.value, true, 0.0, dx.as_mut_slice());
            dx
        })
    }
}

impl Module for Linear {
    fn visit(&self, f: &mut dyn FnMut(&str, &Param)) {
        f("w", &self.w);
        f("b", &self.b);
    }

    fn visit_mut(&mut self, f: &mut dyn FnMut(&str, &mut Param)) {
        f("w", &mut self.w);
        f("b", &mut self.b);
    }
}
