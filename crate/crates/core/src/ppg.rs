//! Phonetic posteriorgrams: validated `T x D_p` posterior matrices, frame
//! label sequences, and a small context-window MLP that produces them from
//! mel frames.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt::Write as _;

use rand::seq::SliceRandom;
use rand::SeedableRng;

use crate::dsp::{MelSpectrogram, MEL_DIM};
use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::nn::{
    relu_backward, relu_inplace, softmax_rows, visit_child, visit_child_mut, zero_grad, Adam, Linear, Module, Param,
    Rng,
};

/// Allowed deviation of a posterior row sum from one.
pub const SIMPLEX_TOLERANCE: f32 = 1e-4;
/// Class count mirroring large ASR posteriors.
pub const EXTERNAL_PPG_DIM: usize = 512;
/// Class count of the built-in classifier.
pub const TOY_PPG_DIM: usize = 40;

/// Frame posteriors; every row is non-negative and sums to one.
#[derive(Debug, Clone, PartialEq)]
pub struct Ppg {
    values: Matrix,
}

impl Ppg {
    pub fn new(values: Matrix) -> Result<Self> {
        if values.cols() == 0 {
            return Err(Error::Empty("posterior classes"));
        }
        for r in 0..values.rows() {
            let row = values.row(r);
            let min = row.iter().fold(f32::INFINITY, |m, &v| m.min(v));
            let sum: f32 = row.iter().sum();
            if !sum.is_finite() || !(min >= 0.0) || (sum - 1.0).abs() > SIMPLEX_TOLERANCE {
                return Err(Error::NotOnSimplex { row: r, sum, min });
            }
        }
        Ok(Self { values })
    }

    /// One-hot rows for `labels`.
    pub fn one_hot(labels: &PhoneLabels) -> Self {
        let mut m = Matrix::zeros(labels.len(), labels.classes());
        for (t, &l) in labels.as_slice().iter().enumerate() {
            m.set(t, l as usize, 1.0);
        }
        Self { values: m }
    }

    pub fn frames(&self) -> usize {
        self.values.rows()
    }

    pub fn dim(&self) -> usize {
        self.values.cols()
    }

    pub fn values(&self) -> &Matrix {
        &self.values
    }

    pub fn into_matrix(self) -> Matrix {
        self.values
    }

    pub fn expect_frames(&self, frames: usize) -> Result<()> {
        if self.frames() != frames {
            return Err(Error::FrameMismatch { what: "ppg", expected: frames, got: self.frames() });
        }
        Ok(())
    }
}

/// Per-frame integer class labels.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PhoneLabels {
    labels: Vec<u32>,
    classes: usize,
}

impl PhoneLabels {
    pub fn new(labels: Vec<u32>, classes: usize) -> Result<Self> {
        if let Some((frame, &label)) = labels.iter().enumerate().find(|(_, &l)| l as usize >= classes) {
            return Err(Error::LabelOutOfRange { frame, label, classes });
        }
        Ok(Self { labels, classes })
    }

    /// One integer per non-empty line.
    pub fn parse(text: &str, classes: usize) -> Result<Self> {
        let mut labels = Vec::new();
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            let v = line.parse::<u32>().map_err(|_| Error::ManifestParse {
                line: i + 1,
                msg: alloc::format!("not a class index: {line:?}"),
            })?;
            labels.push(v);
        }
        Self::new(labels, classes)
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        for l in &self.labels {
            let _ = writeln!(s, "{l}");
        }
        s
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn classes(&self) -> usize {
        self.classes
    }

    pub fn as_slice(&self) -> &[u32] {
        &self.labels
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default, deny_unknown_fields))]
pub struct ClassifierConfig {
    pub classes: usize,
    /// Frames of context on each side.
    pub context: usize,
    pub hidden: usize,
    pub learning_rate: f32,
    pub steps: usize,
    pub batch_frames: usize,
    pub seed: u64,
}

impl Default for ClassifierConfig {
    fn default() -> Self {
        Self { classes: TOY_PPG_DIM, context: 5, hidden: 256, learning_rate: 1e-3, steps: 400, batch_frames: 256, seed: 0 }
    }
}

impl ClassifierConfig {
    pub fn input_dim(&self) -> usize {
        (2 * self.context + 1) * MEL_DIM
    }

    pub fn validate(&self) -> Result<()> {
        if self.classes < 2 || self.hidden == 0 || self.batch_frames == 0 {
            return Err(Error::InvalidConfig("classifier needs >= 2 classes and non-zero sizes".into()));
        }
        if !(self.learning_rate > 0.0) {
            return Err(Error::InvalidConfig("classifier learning rate must be positive".into()));
        }
        Ok(())
    }
}

/// Frame classifier: stacked mel context, two ReLU layers, softmax.
/// Input statistics are part of the parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct PhoneClassifier {
    config: ClassifierConfig,
    mean: Param,
    inv_std: Param,
    l1: Linear,
    l2: Linear,
    l3: Linear,
}

/// Output-layer weights start this small, so an untrained model is near uniform.
const OUTPUT_INIT_SCALE: f32 = 0.01;

impl PhoneClassifier {
    pub fn new(config: ClassifierConfig) -> Result<Self> {
        config.validate()?;
        let mut rng = Rng::seed_from_u64(config.seed);
        let d = config.input_dim();
        let l1 = Linear::new(d, config.hidden, &mut rng);
        let l2 = Linear::new(config.hidden, config.hidden, &mut rng);
        let mut l3 = Linear::new(config.hidden, config.classes, &mut rng);
        l3.w.value.iter_mut().chain(l3.b.value.iter_mut()).for_each(|v| *v *= OUTPUT_INIT_SCALE);
        Ok(Self { config, mean: Param::zeros(MEL_DIM), inv_std: Param::filled(MEL_DIM, 1.0), l1, l2, l3 })
    }

    pub fn config(&self) -> &ClassifierConfig {
        &self.config
    }

    pub fn classes(&self) -> usize {
        self.config.classes
    }

    /// `T x (2c+1)*80` normalised context windows; edges repeat the outer frame.
    fn context(&self, mel: &MelSpectrogram) -> Matrix {
        let m = mel.values();
        let t_len = m.rows();
        let c = self.config.context as isize;
        let mut out = Matrix::zeros(t_len, self.config.input_dim());
        for t in 0..t_len {
            let row = out.row_mut(t);
            for (j, off) in (-c..=c).enumerate() {
                let src = (t as isize + off).clamp(0, t_len as isize - 1) as usize;
                let dst = &mut row[j * MEL_DIM..(j + 1) * MEL_DIM];
                for (k, (d, &v)) in dst.iter_mut().zip(m.row(src)).enumerate() {
                    *d = (v - self.mean.value[k]) * self.inv_std.value[k];
                }
            }
        }
        out
    }

    fn logits(&self, x: &Matrix) -> (Matrix, Matrix, Matrix) {
        let mut h1 = self.l1.forward(x);
        relu_inplace(h1.as_mut_slice());
        let mut h2 = self.l2.forward(&h1);
        relu_inplace(h2.as_mut_slice());
        let z = self.l3.forward(&h2);
        (h1, h2, z)
    }

    pub fn extract(&self, mel: &MelSpectrogram) -> Result<Ppg> {
        if mel.frames() == 0 {
            return Err(Error::Empty("mel frames"));
        }
        let (_, _, z) = self.logits(&self.context(mel));
        Ppg::new(softmax_rows(&z))
    }

    /// Fraction of frames whose arg-max class equals the label.
    pub fn accuracy(&self, mel: &MelSpectrogram, labels: &PhoneLabels) -> Result<f64> {
        check_alignment(mel, labels)?;
        let ppg = self.extract(mel)?;
        let hits = (0..ppg.frames())
            .filter(|&t| argmax(ppg.values().row(t)) == labels.as_slice()[t] as usize)
            .count();
        Ok(hits as f64 / ppg.frames().max(1) as f64)
    }

    fn set_normalisation(&mut self, data: &[(MelSpectrogram, PhoneLabels)]) {
        let mut sum = vec![0.0f64; MEL_DIM];
        let mut sq = vec![0.0f64; MEL_DIM];
        let mut n = 0.0f64;
        for (mel, _) in data {
            for t in 0..mel.frames() {
                for (k, &v) in mel.values().row(t).iter().enumerate() {
                    sum[k] += f64::from(v);
                    sq[k] += f64::from(v) * f64::from(v);
                }
                n += 1.0;
            }
        }
        for k in 0..MEL_DIM {
            let mean = sum[k] / n;
            let var = (sq[k] / n - mean * mean).max(0.0);
            self.mean.value[k] = mean as f32;
            self.inv_std.value[k] = (1.0 / libm::sqrt(var + 1e-3)) as f32;
        }
    }
}

impl Module for PhoneClassifier {
    fn visit(&self, f: &mut dyn FnMut(&str, &Param)) {
        f("norm.mean", &self.mean);
        f("norm.inv_std", &self.inv_std);
        visit_child("l1", &self.l1, f);
        visit_child("l2", &self.l2, f);
        visit_child("l3", &self.l3, f);
    }

    fn visit_mut(&mut self, f: &mut dyn FnMut(&str, &mut Param)) {
        f("norm.mean", &mut self.mean);
        f("norm.inv_std", &mut self.inv_std);
        visit_child_mut("l1", &mut self.l1, f);
        visit_child_mut("l2", &mut self.l2, f);
        visit_child_mut("l3", &mut self.l3, f);
    }
}

fn check_alignment(mel: &MelSpectrogram, labels: &PhoneLabels) -> Result<()> {
    if mel.frames() != labels.len() {
        return Err(Error::FrameMismatch { what: "phone labels", expected: mel.frames(), got: labels.len() });
    }
    Ok(())
}

fn argmax(row: &[f32]) -> usize {
    row.iter().enumerate().fold((0, f32::NEG_INFINITY), |best, (i, &v)| if v > best.1 { (i, v) } else { best }).0
}

/// Mean frame cross-entropy per step.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassifierTrace {
    pub losses: Vec<f32>,
}

/// Cross-entropy training on random frame minibatches with Adam.
pub fn train_classifier(
    data: &[(MelSpectrogram, PhoneLabels)],
    config: ClassifierConfig,
) -> Result<(PhoneClassifier, ClassifierTrace)> {
    if data.len() < 2 {
        return Err(Error::InvalidConfig("classifier training needs at least 2 labelled utterances".into()));
    }
    let mut model = PhoneClassifier::new(config)?;
    for (mel, labels) in data {
        check_alignment(mel, labels)?;
        if labels.classes() != config.classes {
            return Err(Error::DimMismatch { what: "label classes", expected: config.classes, got: labels.classes() });
        }
    }
    model.set_normalisation(data);

    let contexts: Vec<Matrix> = data.iter().map(|(mel, _)| model.context(mel)).collect();
    let mut frames: Vec<(usize, usize)> =
        data.iter().enumerate().flat_map(|(u, (mel, _))| (0..mel.frames()).map(move |t| (u, t))).collect();
    if frames.is_empty() {
        return Err(Error::Empty("labelled frames"));
    }
    let mut rng = Rng::seed_from_u64(config.seed ^ 0x5050_4721);
    let mut opt = Adam::new(config.learning_rate);
    let d = config.input_dim();
    let b = config.batch_frames.min(frames.len());
    let mut cursor = frames.len();
    let mut losses = Vec::with_capacity(config.steps);

    for step in 0..config.steps {
        if cursor + b > frames.len() {
            frames.shuffle(&mut rng);
            cursor = 0;
        }
        let batch = &frames[cursor..cursor + b];
        cursor += b;
        let mut x = Matrix::zeros(b, d);
        for (i, &(u, t)) in batch.iter().enumerate() {
            x.row_mut(i).copy_from_slice(contexts[u].row(t));
        }
        let (h1, h2, z) = model.logits(&x);
        let mut dz = softmax_rows(&z);
        let mut loss = 0.0f64;
        for (i, &(u, t)) in batch.iter().enumerate() {
            let l = data[u].1.as_slice()[t] as usize;
            let row = dz.row_mut(i);
            loss -= libm::log(f64::from(row[l]).max(1e-30));
            row[l] -= 1.0;
            row.iter_mut().for_each(|v| *v /= b as f32);
        }
        let loss = (loss / b as f64) as f32;
        if !loss.is_finite() {
            return Err(Error::NonFinite { what: "classifier loss", step: step as u64 });
        }
        losses.push(loss);

        zero_grad(&mut model);
        let mut dh2 = model.l3.backward(&h2, &dz, true).expect("dx requested");
        relu_backward(h2.as_slice(), dh2.as_mut_slice());
        let mut dh1 = model.l2.backward(&h1, &dh2, true).expect("dx requested");
        relu_backward(h1.as_slice(), dh1.as_mut_slice());
        model.l1.backward(&x, &dh1, false);
        opt.step(&mut model)?;
    }
    Ok((model, ClassifierTrace { losses }))
}
