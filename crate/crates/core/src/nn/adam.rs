use alloc::vec::Vec;

use super::param::Module;
use crate::error::{Error, Result};

/// Adam with bias correction.
#[derive(Debug, Clone, PartialEq)]
pub struct Adam {
    pub lr: f32,
    pub beta1: f32,
    pub beta2: f32,
    pub eps: f32,
    state: AdamState,
}

/// First and second moments per parameter tensor (visit order) and the
/// update count.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct AdamState {
    pub t: u64,
    pub m: Vec<Vec<f32>>,
    pub v: Vec<Vec<f32>>,
}

impl Adam {
    pub fn new(lr: f32) -> Self {
        Self { lr, beta1: 0.9, beta2: 0.999, eps: 1e-8, state: AdamState::default() }
    }

    pub fn state(&self) -> &AdamState {
        &self.state
    }

    pub fn set_state(&mut self, state: AdamState) {
        self.state = state;
    }

    pub fn step(&mut self, model: &mut dyn Module) -> Result<()> {
        let st = &mut self.state;
        if st.m.is_empty() {
            model.visit(&mut |_, p| {
                st.m.push(alloc::vec![0.0; p.len()]);
                st.v.push(alloc::vec![0.0; p.len()]);
            });
        }
        st.t += 1;
        let t = st.t as i32;
        let (b1, b2, lr, eps) = (self.beta1, self.beta2, self.lr, self.eps);
        let c1 = 1.0 - libm::powf(b1, t as f32);
        let c2 = 1.0 - libm::powf(b2, t as f32);
        let mut i = 0;
        let mut mismatch = false;
        model.visit_mut(&mut |_, p| {
            let (Some(m), Some(v)) = (st.m.get_mut(i), st.v.get_mut(i)) else {
                mismatch = true;
                return;
            };
            if m.len() != p.len() {
                mismatch = true;
                return;
            }
            for j in 0..p.len() {
                let g = p.grad[j];
                m[j] = b1 * m[j] + (1.0 - b1) * g;
                v[j] = b2 * v[j] + (1.0 - b2) * g * g;
                let mhat = m[j] / c1;
                let vhat = v[j] / c2;
                p.value[j] -= lr * mhat / (libm::sqrtf(vhat) + eps);
            }
            i += 1;
        });
        if mismatch || i != st.m.len() {
            return Err(Error::ConfigMismatch("optimizer state does not match the model".into()));
        }
        Ok(())
    }
}

/// Global L2 norm over all gradients.
pub fn grad_norm(model: &dyn Module) -> f32 {
    let mut sq = 0.0f64;
    model.visit(&mut |_, p| sq += p.grad.iter().map(|&g| f64::from(g) * f64::from(g)).sum::<f64>());
    libm::sqrt(sq) as f32
}

/// Rescales gradients so the global norm does not exceed `max_norm`;
/// returns the norm before clipping.
pub fn clip_grad_norm(model: &mut dyn Module, max_norm: f32) -> f32 {
    let norm = grad_norm(model);
    if norm > max_norm {
        let scale = max_norm / (norm + 1e-6);
        model.visit_mut(&mut |_, p| p.grad.iter_mut().for_each(|g| *g *= scale));
    }
    norm
}
