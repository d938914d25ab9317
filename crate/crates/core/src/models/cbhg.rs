use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::nn::{
    max_pool2_backward, max_pool2_forward, relu_backward, relu_inplace, visit_child, visit_child_mut, BiGru,
    BiGruCache, Conv1d, ConvBank, ConvBankCache, Highway, HighwayCache, Linear, Module, Param, Rng,
};

use super::config::CbhgConfig;

/// Conv bank, stride-1 max pool, two projection convs with a residual
/// connection, a pre-highway linear layer, highway stack, BiGRU, output
/// linear layer.
#[derive(Debug, Clone, PartialEq)]
pub struct Cbhg {
    input_dim: usize,
    bank: ConvBank,
    proj1: Conv1d,
    proj2: Conv1d,
    pre_highway: Linear,
    highways: Vec<Highway>,
    gru: BiGru,
    output: Linear,
}

#[derive(Debug, Clone)]
pub struct CbhgCache {
    bank: ConvBankCache,
    pool_mask: Vec<bool>,
    proj1_cols: Vec<f32>,
    proj1_out: Matrix,
    proj2_cols: Vec<f32>,
    residual: Matrix,
    highways: Vec<HighwayCache>,
    gru: BiGruCache,
    gru_out: Matrix,
}

const PROJECTION_WIDTH: usize = 3;

impl Cbhg {
    pub fn new(config: &CbhgConfig, input_dim: usize, rng: &mut Rng) -> Self {
        let bank = ConvBank::new(config.bank_k, input_dim, config.bank_filters, rng);
        let proj1 = Conv1d::new(PROJECTION_WIDTH, bank.out_dim(), config.projection_dim, rng);
        let proj2 = Conv1d::new(PROJECTION_WIDTH, config.projection_dim, input_dim, rng);
        let pre_highway = Linear::new(input_dim, config.highway_units, rng);
        let highways = (0..config.highway_layers).map(|_| Highway::new(config.highway_units, rng)).collect();
        let gru = BiGru::new(config.highway_units, config.gru_units, rng);
        let output = Linear::new(gru.out_dim(), config.output_dim, rng);
        Self { input_dim, bank, proj1, proj2, pre_highway, highways, gru, output }
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    pub fn output_dim(&self) -> usize {
        self.output.out_dim
    }

    pub fn forward(&self, x: &Matrix) -> Result<(Matrix, CbhgCache)> {
        if x.cols() != self.input_dim {
            return Err(Error::DimMismatch { what: "cbhg input", expected: self.input_dim, got: x.cols() });
        }
        if x.rows() == 0 {
            return Err(Error::Empty("input frames"));
        }
        let (banked, bank) = self.bank.forward(x);
        let (pooled, pool_mask) = max_pool2_forward(&banked);
        let (mut proj1_out, proj1_cols) = self.proj1.forward(&pooled);
        relu_inplace(proj1_out.as_mut_slice());
        let (mut residual, proj2_cols) = self.proj2.forward(&proj1_out);
        residual.as_mut_slice().iter_mut().zip(x.as_slice()).for_each(|(r, v)| *r += v);

        let mut h = self.pre_highway.forward(&residual);
        let mut highways = Vec::with_capacity(self.highways.len());
        for hw in &self.highways {
            let (y, c) = hw.forward(&h);
            highways.push(c);
            h = y;
        }
        let (gru_out, gru) = self.gru.forward(&h);
        let y = self.output.forward(&gru_out);
        let cache = CbhgCache { bank, pool_mask, proj1_cols, proj1_out, proj2_cols, residual, highways, gru, gru_out };
        Ok((y, cache))
    }

    /// Accumulates gradients; returns `dL/dx` when `need_dx`.
    pub fn backward(&mut self, cache: &CbhgCache, dy: &Matrix, need_dx: bool) -> Option<Matrix> {
        let dgru = self.output.backward(&cache.gru_out, dy, true).expect("dx requested");
        let mut dh = self.gru.backward(&cache.gru, &dgru, true).expect("dx requested");
        for (hw, c) in self.highways.iter_mut().zip(&cache.highways).rev() {
            dh = hw.backward(c, &dh);
        }
        let dres = self.pre_highway.backward(&cache.residual, &dh, true).expect("dx requested");
        let mut dproj1 = self.proj2.backward(&cache.proj2_cols, &dres, true).expect("dx requested");
        relu_backward(cache.proj1_out.as_slice(), dproj1.as_mut_slice());
        let dpooled = self.proj1.backward(&cache.proj1_cols, &dproj1, true).expect("dx requested");
        let dbanked = max_pool2_backward(&dpooled, &cache.pool_mask);
        let dx_bank = self.bank.backward(&cache.bank, &dbanked, need_dx);
        dx_bank.map(|mut dx| {
            dx.as_mut_slice().iter_mut().zip(dres.as_slice()).for_each(|(a, b)| *a += b);
            dx
        })
    }
}

impl Module for Cbhg {
    fn visit(&self, f: &mut dyn FnMut(&str, &Param)) {
        visit_child("bank", &self.bank, f);
        visit_child("proj1", &self.proj1, f);
        visit_child("proj2", &self.proj2, f);
        visit_child("pre_highway", &self.pre_highway, f);
        for (i, h) in self.highways.iter().enumerate() {
            visit_child(&alloc::format!("highway{i}"), h, f);
        }
        visit_child("gru", &self.gru, f);
        visit_child("out", &self.output, f);
    }

    fn visit_mut(&mut self, f: &mut dyn FnMut(&str, &mut Param)) {
        visit_child_mut("bank", &mut self.bank, f);
        visit_child_mut("proj1", &mut self.proj1, f);
        visit_child_mut("proj2", &mut self.proj2, f);
        visit_child_mut("pre_highway", &mut self.pre_highway, f);
        for (i, h) in self.highways.iter_mut().enumerate() {
            visit_child_mut(&alloc::format!("highway{i}"), h, f);
        }
        visit_child_mut("gru", &mut self.gru, f);
        visit_child_mut("out", &mut self.output, f);
    }
}
