use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use rand::Rng as _;

use super::Rng;
use crate::error::{Error, Result};

/// A trainable tensor (flat storage) and its accumulated gradient.
#[derive(Debug, Clone, PartialEq)]
pub struct Param {
    pub value: Vec<f32>,
    pub grad: Vec<f32>,
}

impl Param {
    pub fn zeros(len: usize) -> Self {
        Self { value: vec![0.0; len], grad: vec![0.0; len] }
    }

    pub fn filled(len: usize, v: f32) -> Self {
        Self { value: vec![v; len], grad: vec![0.0; len] }
    }

    /// `U(-bound, bound)` entries.
    pub fn uniform(len: usize, bound: f32, rng: &mut Rng) -> Self {
        let value = (0..len).map(|_| rng.gen_range(-bound..bound)).collect();
        Self { value, grad: vec![0.0; len] }
    }

    /// `U(-1/sqrt(fan_in), 1/sqrt(fan_in))`.
    pub fn fan_in(len: usize, fan_in: usize, rng: &mut Rng) -> Self {
        Self::uniform(len, 1.0 / libm::sqrtf(fan_in.max(1) as f32), rng)
    }

    pub fn len(&self) -> usize {
        self.value.len()
    }

    pub fn is_empty(&self) -> bool {
        self.value.is_empty()
    }
}

/// Anything owning parameters. `visit` and `visit_mut` must walk the same
/// parameters in the same order with the same names.
pub trait Module {
    fn visit(&self, f: &mut dyn FnMut(&str, &Param));
    fn visit_mut(&mut self, f: &mut dyn FnMut(&str, &mut Param));
}

/// Helper for composite modules: visits `child` with names prefixed by `prefix.`.
pub(crate) fn visit_child(prefix: &str, child: &dyn Module, f: &mut dyn FnMut(&str, &Param)) {
    child.visit(&mut |name, p| f(&format!("{prefix}.{name}"), p));
}

pub(crate) fn visit_child_mut(prefix: &str, child: &mut dyn Module, f: &mut dyn FnMut(&str, &mut Param)) {
    child.visit_mut(&mut |name, p| f(&format!("{prefix}.{name}"), p));
}

pub fn zero_grad(m: &mut dyn Module) {
    m.visit_mut(&mut |_, p| p.grad.iter_mut().for_each(|g| *g = 0.0));
}

pub fn param_count(m: &dyn Module) -> usize {
    let mut n = 0;
    m.visit(&mut |_, p| n += p.len());
    n
}

/// Named flat tensor, the unit of checkpoint storage.
#[derive(Debug, Clone, PartialEq)]
pub struct NamedTensor {
    pub name: String,
    pub data: Vec<f32>,
}

pub fn export_params(m: &dyn Module) -> Vec<NamedTensor> {
    let mut out = Vec::new();
    m.visit(&mut |name, p| out.push(NamedTensor { name: name.into(), data: p.value.clone() }));
    out
}

/// Loads values by position, checking names and lengths.
pub fn import_params(m: &mut dyn Module, tensors: &[NamedTensor]) -> Result<()> {
    let mut i = 0;
    let mut err = None;
    m.visit_mut(&mut |name, p| {
        if err.is_some() {
            return;
        }
        match tensors.get(i) {
            Some(t) if t.name == name && t.data.len() == p.len() => p.value.copy_from_slice(&t.data),
            Some(t) => {
                err = Some(Error::ConfigMismatch(format!(
                    "parameter {i}: expected {name} with {} values, found {} with {}",
                    p.len(),
                    t.name,
                    t.data.len()
                )))
            }
            None => err = Some(Error::ConfigMismatch(format!("missing parameter {name}"))),
        }
        i += 1;
    });
    if let Some(e) = err {
        return Err(e);
    }
    if i != tensors.len() {
        return Err(Error::ConfigMismatch(format!("{} stored tensors for {} parameters", tensors.len(), i)));
    }
    Ok(())
}
