//! Self-describing parameter files.
//!
//! Layout: `b"PVCK"`, format version `u32`, header length `u32`, a JSON
//! header (model configuration, step, tensor names and sizes, optimiser
//! step count), then every tensor as little-endian `f32` in header order,
//! followed by the Adam first and second moments when present.

use std::fs;
use std::path::Path;

use prosovc_core::models::{ConversionModel, ModelConfig, TrainConfig, Trainer};
use prosovc_core::nn::{export_params, import_params, AdamState, Module, NamedTensor};
use prosovc_core::ppg::{ClassifierConfig, PhoneClassifier};
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::cache::write_atomic;
use crate::error::{Error, Result, WithPath};

pub const MAGIC: [u8; 4] = *b"PVCK";
pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "config", rename_all = "lowercase")]
enum Architecture {
    Conversion(ModelConfig),
    Classifier(ClassifierConfig),
}

#[derive(Debug, Serialize, Deserialize)]
struct Header {
    architecture: Architecture,
    step: u64,
    train: Option<TrainConfig>,
    tensors: Vec<(String, usize)>,
    adam_t: u64,
    has_moments: bool,
}

/// A conversion model with its training position.
#[derive(Debug, Clone)]
pub struct Checkpoint {
    pub model: ConversionModel,
    pub step: u64,
    pub train: Option<TrainConfig>,
    pub adam: AdamState,
}

impl Checkpoint {
    /// Continues training from the stored step and optimiser state.
    pub fn into_trainer(self, config: TrainConfig) -> prosovc_core::Result<Trainer> {
        Trainer::resume(self.model, config, self.adam, self.step)
    }
}

fn push_f32s(out: &mut Vec<u8>, v: &[f32]) {
    for x in v {
        out.extend_from_slice(&x.to_le_bytes());
    }
}

fn encode(architecture: Architecture, model: &dyn Module, step: u64, train: Option<TrainConfig>, adam: Option<&AdamState>) -> Vec<u8> {
    let tensors = export_params(model);
    let has_moments = adam.is_some_and(|a| !a.m.is_empty());
    let header = Header {
        architecture,
        step,
        train,
        tensors: tensors.iter().map(|t| (t.name.clone(), t.data.len())).collect(),
        adam_t: adam.map_or(0, |a| a.t),
        has_moments,
    };
    let json = serde_json::to_vec(&header).expect("header serialises");
    let mut out = Vec::new();
    out.extend_from_slice(&MAGIC);
    out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    out.extend_from_slice(&(json.len() as u32).to_le_bytes());
    out.extend_from_slice(&json);
    for t in &tensors {
        push_f32s(&mut out, &t.data);
    }
    if let (true, Some(a)) = (has_moments, adam) {
        for m in a.m.iter().chain(&a.v) {
            push_f32s(&mut out, m);
        }
    }
    out
}

struct Decoded {
    header: Header,
    tensors: Vec<NamedTensor>,
    adam: AdamState,
}

fn decode(path: &Path) -> Result<Decoded> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    if bytes.len() < 12 || bytes[..4] != MAGIC {
        return Err(Error::corrupt(path, "not a checkpoint"));
    }
    let version = u32::from_le_bytes(bytes[4..8].try_into().expect("4 bytes"));
    if version != FORMAT_VERSION {
        return Err(Error::corrupt(path, format!("format version {version}, this build reads {FORMAT_VERSION}")));
    }
    let hlen = u32::from_le_bytes(bytes[8..12].try_into().expect("4 bytes")) as usize;
    let json = bytes.get(12..12 + hlen).ok_or_else(|| Error::corrupt(path, "truncated header"))?;
    let header: Header = serde_json::from_slice(json).map_err(|e| Error::corrupt(path, e.to_string()))?;
    let mut floats = bytes[12 + hlen..].chunks_exact(4).map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes")));
    if (bytes.len() - 12 - hlen) % 4 != 0 {
        return Err(Error::corrupt(path, "payload is not a whole number of floats"));
    }
    let mut take = |n: usize| -> Result<Vec<f32>> {
        let v: Vec<f32> = floats.by_ref().take(n).collect();
        if v.len() != n {
            return Err(Error::corrupt(path, "truncated payload"));
        }
        Ok(v)
    };
    let mut tensors = Vec::with_capacity(header.tensors.len());
    for (name, len) in &header.tensors {
        tensors.push(NamedTensor { name: name.clone(), data: take(*len)? });
    }
    let mut adam = AdamState { t: header.adam_t, m: Vec::new(), v: Vec::new() };
    if header.has_moments {
        for (_, len) in &header.tensors {
            adam.m.push(take(*len)?);
        }
        for (_, len) in &header.tensors {
            adam.v.push(take(*len)?);
        }
    }
    if floats.next().is_some() {
        return Err(Error::corrupt(path, "trailing data"));
    }
    Ok(Decoded { header, tensors, adam })
}

pub fn save_checkpoint(
    path: impl AsRef<Path>,
    model: &ConversionModel,
    step: u64,
    train: Option<&TrainConfig>,
    adam: Option<&AdamState>,
) -> Result<()> {
    let bytes = encode(Architecture::Conversion(model.config().clone()), model, step, train.copied(), adam);
    write_atomic(path.as_ref(), &bytes)
}

pub fn save_trainer(path: impl AsRef<Path>, trainer: &Trainer) -> Result<()> {
    save_checkpoint(path, trainer.model(), trainer.step_count(), Some(trainer.config()), Some(trainer.optimizer_state()))
}

pub fn load_checkpoint(path: impl AsRef<Path>) -> Result<Checkpoint> {
    let path = path.as_ref();
    let d = decode(path)?;
    let Architecture::Conversion(config) = d.header.architecture else {
        return Err(Error::ConfigMismatch { path: path.into(), msg: "file holds a phone classifier".into() });
    };
    let mut model = ConversionModel::new(config).at(path)?;
    import_params(&mut model, &d.tensors)
        .map_err(|e| Error::ConfigMismatch { path: path.into(), msg: e.to_string() })?;
    Ok(Checkpoint { model, step: d.header.step, train: d.header.train, adam: d.adam })
}

/// Loads and requires the stored configuration to equal `expected`.
pub fn load_checkpoint_expecting(path: impl AsRef<Path>, expected: &ModelConfig) -> Result<Checkpoint> {
    let path = path.as_ref();
    let ck = load_checkpoint(path)?;
    let diffs = config_diff(ck.model.config(), expected);
    if !diffs.is_empty() {
        return Err(Error::ConfigMismatch { path: path.into(), msg: diffs.join(", ") });
    }
    Ok(ck)
}

pub fn save_classifier(path: impl AsRef<Path>, model: &PhoneClassifier) -> Result<()> {
    write_atomic(path.as_ref(), &encode(Architecture::Classifier(*model.config()), model, 0, None, None))
}

pub fn load_classifier(path: impl AsRef<Path>) -> Result<PhoneClassifier> {
    let path = path.as_ref();
    let d = decode(path)?;
    let Architecture::Classifier(config) = d.header.architecture else {
        return Err(Error::ConfigMismatch { path: path.into(), msg: "file holds a conversion model".into() });
    };
    let mut model = PhoneClassifier::new(config).at(path)?;
    import_params(&mut model, &d.tensors)
        .map_err(|e| Error::ConfigMismatch { path: path.into(), msg: e.to_string() })?;
    Ok(model)
}

/// Dotted keys whose values differ, as `key: stored X, expected Y`.
pub fn config_diff<T: Serialize>(stored: &T, expected: &T) -> Vec<String> {
    fn walk(prefix: &str, a: &Value, b: &Value, out: &mut Vec<String>) {
        match (a, b) {
            (Value::Object(x), Value::Object(y)) => {
                for (k, va) in x {
                    let key = if prefix.is_empty() { k.clone() } else { format!("{prefix}.{k}") };
                    walk(&key, va, y.get(k).unwrap_or(&Value::Null), out);
                }
            }
            _ if a != b => out.push(format!("{prefix}: stored {a}, expected {b}")),
            _ => {}
        }
    }
    let mut out = Vec::new();
    walk("", &serde_json::to_value(stored).expect("serialises"), &serde_json::to_value(expected).expect("serialises"), &mut out);
    out
}
