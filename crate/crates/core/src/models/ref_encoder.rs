use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::nn::{
    relu_backward, visit_child, visit_child_mut, ChannelNorm, ChannelNormCache, Conv2d, Conv2dCache, FeatureMap, Gru,
    GruCache, Module, Param, Rng,
};

use super::config::RefEncoderConfig;
use super::input::ProsodyEmbedding;

/// Log-mel values are mapped through `(x - MEL_OFFSET) / MEL_SCALE` before
/// the first convolution.
pub const MEL_OFFSET: f32 = -5.0;
pub const MEL_SCALE: f32 = 10.0;

/// Conv2d stack (stride 2 along frequency) into a unidirectional GRU whose
/// per-frame outputs are the prosody embedding.
#[derive(Debug, Clone, PartialEq)]
pub struct ReferenceEncoder {
    mel_dim: usize,
    convs: Vec<Conv2d>,
    norms: Vec<ChannelNorm>,
    gru: Gru,
}

#[derive(Debug, Clone)]
pub struct ReferenceEncoderCache {
    convs: Vec<Conv2dCache>,
    norms: Vec<ChannelNormCache>,
    outs: Vec<FeatureMap>,
    gru: GruCache,
}

impl ReferenceEncoder {
    pub fn new(config: &RefEncoderConfig, mel_dim: usize, rng: &mut Rng) -> Self {
        let mut convs = Vec::new();
        let mut norms = Vec::new();
        let mut in_ch = 1;
        for &out_ch in &config.conv_filters {
            convs.push(Conv2d::new(in_ch, out_ch, rng));
            if config.channel_norm {
                norms.push(ChannelNorm::new(out_ch));
            }
            in_ch = out_ch;
        }
        let gru = Gru::new(config.gru_input_dim(mel_dim), config.embedding_dim, false, rng);
        Self { mel_dim, convs, norms, gru }
    }

    pub fn embedding_dim(&self) -> usize {
        self.gru.hidden
    }

    pub fn encode(&self, mel: &Matrix) -> Result<ProsodyEmbedding> {
        let (p, _) = self.forward(mel)?;
        ProsodyEmbedding::new(p)
    }

    pub fn forward(&self, mel: &Matrix) -> Result<(Matrix, ReferenceEncoderCache)> {
        if mel.rows() == 0 {
            return Err(Error::Empty("mel frames"));
        }
        if mel.cols() != self.mel_dim {
            return Err(Error::DimMismatch { what: "reference encoder mel", expected: self.mel_dim, got: mel.cols() });
        }
        let mut x = FeatureMap { time: mel.rows(), freq: mel.cols(), channels: 1, data: mel.as_slice().iter().map(|v| (v - MEL_OFFSET) / MEL_SCALE).collect() };
        let mut convs = Vec::with_capacity(self.convs.len());
        let mut norms = Vec::with_capacity(self.norms.len());
        let mut outs = Vec::with_capacity(self.convs.len());
        for (i, conv) in self.convs.iter().enumerate() {
            let (mut y, c) = conv.forward(&x);
            convs.push(c);
            if let Some(norm) = self.norms.get(i) {
                norms.push(norm.forward(&mut y.data));
            }
            y.data.iter_mut().for_each(|v| *v = v.max(0.0));
            outs.push(y.clone());
            x = y;
        }
        let flat = Matrix::new(x.time, x.freq * x.channels, x.data)?;
        let (p, gru) = self.gru.forward(&flat);
        Ok((p, ReferenceEncoderCache { convs, norms, outs, gru }))
    }

    pub fn backward(&mut self, cache: &ReferenceEncoderCache, dp: &Matrix) {
        let dflat = self.gru.backward(&cache.gru, dp, true).expect("dx requested");
        let mut dy = cache.outs.last().cloned().expect("at least one conv layer");
        dy.data = dflat.into_vec();
        for i in (0..self.convs.len()).rev() {
            relu_backward(&cache.outs[i].data, &mut dy.data);
            if let Some(norm) = self.norms.get_mut(i) {
                norm.backward(&cache.norms[i], &mut dy.data);
            }
            match self.convs[i].backward(&cache.convs[i], &dy, i > 0) {
                Some(dx) => dy = dx,
                None => break,
            }
        }
    }
}

impl Module for ReferenceEncoder {
    fn visit(&self, f: &mut dyn FnMut(&str, &Param)) {
        for (i, c) in self.convs.iter().enumerate() {
            visit_child(&alloc::format!("conv{i}"), c, f);
            if let Some(n) = self.norms.get(i) {
                visit_child(&alloc::format!("norm{i}"), n, f);
            }
        }
        visit_child("gru", &self.gru, f);
    }

    fn visit_mut(&mut self, f: &mut dyn FnMut(&str, &mut Param)) {
        for (i, c) in self.convs.iter_mut().enumerate() {
            visit_child_mut(&alloc::format!("conv{i}"), c, f);
            if let Some(n) = self.norms.get_mut(i) {
                visit_child_mut(&alloc::format!("norm{i}"), n, f);
            }
        }
        visit_child_mut("gru", &mut self.gru, f);
    }
}
