//! Supervised reference classifier: feature-hashed bag of words, one tanh
//! hidden layer and a linear head, trained by mini-batch SGD.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::String;
use alloc::sync::Arc;
use alloc::vec;
use alloc::vec::Vec;
use core::hash::Hasher;
use core::ops::Deref;

use fnv::FnvHasher;
use rand::seq::SliceRandom;
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::math;
use crate::seed;

pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum NeuralError {
    #[error("training needs at least two classes, found {0}")]
    TooFewClasses(usize),
    #[error("class {0:?} has no training examples")]
    EmptyClass(String),
    #[error("label {0:?} is not a model class")]
    UnknownLabel(String),
    #[error("class {0:?} is already in the model")]
    DuplicateClass(String),
    #[error("loss became non-finite in epoch {epoch}, batch {batch} (last finite loss {last_loss})")]
    NonFiniteLoss { epoch: usize, batch: usize, last_loss: f64 },
    #[error("invalid configuration: {0}")]
    Config(String),
}

/// Encoder shape and initialization.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EncoderSpec {
    pub buckets: usize,
    pub hidden: usize,
    pub hash_seed: u64,
    /// Input weights start uniform in `[-init_scale, init_scale]`.
    pub init_scale: f64,
}

impl Default for EncoderSpec {
    fn default() -> Self {
        EncoderSpec { buckets: 1 << 15, hidden: 64, hash_seed: 0, init_scale: 1.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub seed: u64,
    /// Per-class loss weights in model class order.
    pub class_weights: Option<Vec<f64>>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig { learning_rate: 5e-6, batch_size: 64, epochs: 3, seed: 3407, class_weights: None }
    }
}

impl TrainConfig {
    fn validate(&self, classes: usize) -> Result<(), NeuralError> {
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(NeuralError::Config(format!("learning rate {}", self.learning_rate)));
        }
        if self.batch_size == 0 {
            return Err(NeuralError::Config("batch size 0".into()));
        }
        if let Some(w) = &self.class_weights {
            if w.len() != classes || w.iter().any(|v| !(*v >= 0.0 && v.is_finite())) {
                return Err(NeuralError::Config(format!("{} class weights for {classes} classes", w.len())));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabeledText {
    pub text: String,
    pub label: String,
}

impl LabeledText {
    pub fn new(text: impl Into<String>, label: impl Into<String>) -> Self {
        LabeledText { text: text.into(), label: label.into() }
    }
}

/// L2-normalized hashed word counts.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseFeatures {
    pub indices: Vec<u32>,
    pub values: Vec<f64>,
}

pub fn hash_bucket(spec: &EncoderSpec, token: &str) -> u32 {
    let mut h = FnvHasher::default();
    h.write(&spec.hash_seed.to_le_bytes());
    h.write(token.as_bytes());
    (h.finish() % spec.buckets as u64) as u32
}

pub fn encode_bag(spec: &EncoderSpec, text: &str) -> SparseFeatures {
    let mut counts: BTreeMap<u32, f64> = BTreeMap::new();
    for word in text.split_whitespace() {
        *counts.entry(hash_bucket(spec, &word.to_lowercase())).or_insert(0.0) += 1.0;
    }
    let norm = math::sqrt(counts.values().map(|c| c * c).sum());
    let (indices, values) = counts.into_iter().map(|(i, c)| (i, c / norm)).unzip();
    SparseFeatures { indices, values }
}

/// Frozen teacher for distillation on the first `teacher.classes().len()` outputs.
#[derive(Debug, Clone, Copy)]
pub struct Distillation<'a> {
    pub teacher: &'a NeuralClassifier,
    pub lambda: f64,
    pub temperature: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainLog {
    /// Full-pass objective before the first update.
    pub initial_loss: f64,
    /// Full-pass objective after each epoch.
    pub epoch_losses: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NeuralClassifier {
    pub version: u32,
    pub spec: EncoderSpec,
    pub classes: Vec<String>,
    /// `buckets x hidden`, row per bucket.
    pub(crate) w1: Vec<f64>,
    pub(crate) b1: Vec<f64>,
    /// One row of `hidden` weights per class.
    pub(crate) head: Vec<Vec<f64>>,
    pub(crate) head_bias: Vec<f64>,
}

/// An immutable, cheaply shareable copy of a classifier.
#[derive(Debug, Clone, PartialEq)]
pub struct Frozen(Arc<NeuralClassifier>);

impl Deref for Frozen {
    type Target = NeuralClassifier;

    fn deref(&self) -> &NeuralClassifier {
        &self.0
    }
}

impl Frozen {
    pub fn snapshot(&self) -> Frozen {
        self.clone()
    }
}

struct Encoded {
    x: SparseFeatures,
    target: usize,
    weight: f64,
    teacher: Option<Vec<f64>>,
}

struct Forward {
    hidden: Vec<f64>,
    logits: Vec<f64>,
}

/// Gradient with the input layer stored by touched bucket.
struct Gradient {
    w1_rows: BTreeMap<u32, Vec<f64>>,
    b1: Vec<f64>,
    head: Vec<Vec<f64>>,
    head_bias: Vec<f64>,
}

impl NeuralClassifier {
    pub fn new(spec: EncoderSpec, classes: Vec<String>, seed: u64) -> Result<Self, NeuralError> {
        if spec.buckets == 0 || spec.hidden == 0 {
            return Err(NeuralError::Config(format!("encoder {}x{}", spec.buckets, spec.hidden)));
        }
        for (i, c) in classes.iter().enumerate() {
            if classes[..i].contains(c) {
                return Err(NeuralError::DuplicateClass(c.clone()));
            }
        }
        let mut rng = seed::derived_rng(seed, "neural-init");
        let s = spec.init_scale;
        let w1 = (0..spec.buckets * spec.hidden)
            .map(|_| if s > 0.0 { rng.random_range(-s..s) } else { 0.0 })
            .collect();
        let k = classes.len();
        Ok(NeuralClassifier {
            version: CHECKPOINT_VERSION,
            spec,
            classes,
            w1,
            b1: vec![0.0; spec.hidden],
            head: vec![vec![0.0; spec.hidden]; k],
            head_bias: vec![0.0; k],
        })
    }

    pub fn num_classes(&self) -> usize {
        self.classes.len()
    }

    pub fn class_index(&self, label: &str) -> Option<usize> {
        self.classes.iter().position(|c| c == label)
    }

    fn hidden(&self, x: &SparseFeatures) -> Vec<f64> {
        let h = self.spec.hidden;
        let mut a = self.b1.clone();
        for (&j, &v) in x.indices.iter().zip(&x.values) {
            let row = &self.w1[j as usize * h..(j as usize + 1) * h];
            for (ai, wi) in a.iter_mut().zip(row) {
                *ai += v * wi;
            }
        }
        a.into_iter().map(libm::tanh).collect()
    }

    fn forward(&self, x: &SparseFeatures) -> Forward {
        let hidden = self.hidden(x);
        let logits = self
            .head
            .iter()
            .zip(&self.head_bias)
            .map(|(row, b)| math::dot(row, &hidden) + b)
            .collect();
        Forward { hidden, logits }
    }

    /// Hidden-layer representation, used for exemplar selection.
    pub fn embed(&self, text: &str) -> Vec<f64> {
        self.hidden(&encode_bag(&self.spec, text))
    }

    /// Raw pre-softmax scores, one per class.
    pub fn predict_logits(&self, text: &str) -> Vec<f64> {
        self.forward(&encode_bag(&self.spec, text)).logits
    }

    /// Index of the highest logit, first class on ties.
    pub fn predict_index(&self, text: &str) -> usize {
        math::argmax(&self.predict_logits(text)).unwrap_or(0)
    }

    pub fn predict(&self, text: &str) -> &str {
        &self.classes[self.predict_index(text)]
    }

    /// Deep copy that later training of `self` cannot affect.
    pub fn snapshot(&self) -> Frozen {
        Frozen(Arc::new(self.clone()))
    }

    /// Appends `label` with a zero-initialized output row.
    pub fn add_class(&mut self, label: &str) -> Result<(), NeuralError> {
        if self.class_index(label).is_some() {
            return Err(NeuralError::DuplicateClass(label.into()));
        }
        self.classes.push(label.into());
        self.head.push(vec![0.0; self.spec.hidden]);
        self.head_bias.push(0.0);
        Ok(())
    }

    fn encode(
        &self,
        data: &[LabeledText],
        class_weights: Option<&[f64]>,
        distill: Option<&Distillation<'_>>,
    ) -> Result<Vec<Encoded>, NeuralError> {
        data.iter()
            .map(|ex| {
                let target = self.class_index(&ex.label).ok_or_else(|| NeuralError::UnknownLabel(ex.label.clone()))?;
                let x = encode_bag(&self.spec, &ex.text);
                let teacher = distill.filter(|d| d.lambda != 0.0).map(|d| d.teacher.predict_logits(&ex.text));
                let weight = class_weights.map_or(1.0, |w| w[target]);
                Ok(Encoded { x, target, weight, teacher })
            })
            .collect()
    }

    /// Loss of one example and its gradient with respect to the logits.
    fn example_loss(&self, logits: &[f64], ex: &Encoded, distill: Option<&Distillation<'_>>) -> (f64, Vec<f64>) {
        let logp = math::log_softmax(logits);
        let mut loss = -ex.weight * logp[ex.target];
        let mut dz: Vec<f64> = logp.iter().map(|l| ex.weight * math::exp(*l)).collect();
        dz[ex.target] -= ex.weight;
        if let (Some(d), Some(old)) = (distill, &ex.teacher) {
            let t = d.temperature;
            let m = old.len();
            let p_old = math::softmax_t(old, t);
            let logq = math::log_softmax(&logits[..m].iter().map(|z| z / t).collect::<Vec<_>>());
            let kl: f64 = p_old
                .iter()
                .zip(&logq)
                .filter(|(p, _)| **p > 0.0)
                .map(|(p, lq)| p * (math::ln(*p) - lq))
                .sum();
            loss += d.lambda * t * t * kl;
            for i in 0..m {
                dz[i] += d.lambda * t * (math::exp(logq[i]) - p_old[i]);
            }
        }
        (loss, dz)
    }

    fn batch_gradient(&self, batch: &[&Encoded], distill: Option<&Distillation<'_>>) -> (f64, Gradient) {
        let (h, k) = (self.spec.hidden, self.classes.len());
        let mut g = Gradient {
            w1_rows: BTreeMap::new(),
            b1: vec![0.0; h],
            head: vec![vec![0.0; h]; k],
            head_bias: vec![0.0; k],
        };
        let scale = 1.0 / batch.len() as f64;
        let mut total = 0.0;
        for ex in batch {
            let f = self.forward(&ex.x);
            let (loss, dz) = self.example_loss(&f.logits, ex, distill);
            total += loss;
            let mut dh = vec![0.0; h];
            for (c, &z) in dz.iter().enumerate().take(k) {
                let d = z * scale;
                g.head_bias[c] += d;
                for (i, dhi) in dh.iter_mut().enumerate() {
                    g.head[c][i] += d * f.hidden[i];
                    *dhi += d * self.head[c][i];
                }
            }
            let da: Vec<f64> = dh.iter().zip(&f.hidden).map(|(d, a)| d * (1.0 - a * a)).collect();
            for (b, d) in g.b1.iter_mut().zip(&da) {
                *b += d;
            }
            for (&j, &v) in ex.x.indices.iter().zip(&ex.x.values) {
                let row = g.w1_rows.entry(j).or_insert_with(|| vec![0.0; h]);
                for (r, d) in row.iter_mut().zip(&da) {
                    *r += v * d;
                }
            }
        }
        (total * scale, g)
    }

    fn apply(&mut self, g: &Gradient, lr: f64) {
        let h = self.spec.hidden;
        for (&j, row) in &g.w1_rows {
            let w = &mut self.w1[j as usize * h..(j as usize + 1) * h];
            for (wi, gi) in w.iter_mut().zip(row) {
                *wi -= lr * gi;
            }
        }
        for (b, d) in self.b1.iter_mut().zip(&g.b1) {
            *b -= lr * d;
        }
        for (row, grow) in self.head.iter_mut().zip(&g.head) {
            for (w, d) in row.iter_mut().zip(grow) {
                *w -= lr * d;
            }
        }
        for (b, d) in self.head_bias.iter_mut().zip(&g.head_bias) {
            *b -= lr * d;
        }
    }

    fn full_loss(&self, data: &[Encoded], distill: Option<&Distillation<'_>>) -> f64 {
        if data.is_empty() {
            return 0.0;
        }
        let total: f64 = data.iter().map(|ex| self.example_loss(&self.forward(&ex.x).logits, ex, distill).0).sum();
        total / data.len() as f64
    }

    /// Runs `config.epochs` epochs of mini-batch SGD over `data`, minimizing
    /// class-weighted cross-entropy plus optional distillation. All gradients
    /// of a batch are taken at the same parameters. Labels must already be
    /// model classes.
    pub fn fit(
        &mut self,
        data: &[LabeledText],
        config: &TrainConfig,
        distill: Option<Distillation<'_>>,
    ) -> Result<TrainLog, NeuralError> {
        config.validate(self.classes.len())?;
        if let Some(d) = &distill {
            if d.teacher.classes.len() > self.classes.len() || d.temperature.is_nan() || d.temperature <= 0.0 || d.lambda.is_nan() || d.lambda < 0.0 {
                return Err(NeuralError::Config("teacher wider than student or invalid λ/T".into()));
            }
        }
        let encoded = self.encode(data, config.class_weights.as_deref(), distill.as_ref())?;
        let mut log = TrainLog { initial_loss: self.full_loss(&encoded, distill.as_ref()), epoch_losses: Vec::new() };
        let mut rng = seed::derived_rng(config.seed, "neural-shuffle");
        let mut order: Vec<usize> = (0..encoded.len()).collect();
        let mut last_loss = log.initial_loss;
        for epoch in 0..config.epochs {
            order.shuffle(&mut rng);
            for (batch_no, chunk) in order.chunks(config.batch_size).enumerate() {
                let batch: Vec<&Encoded> = chunk.iter().map(|&i| &encoded[i]).collect();
                let (loss, grad) = self.batch_gradient(&batch, distill.as_ref());
                if !loss.is_finite() {
                    return Err(NeuralError::NonFiniteLoss { epoch, batch: batch_no, last_loss });
                }
                last_loss = loss;
                self.apply(&grad, config.learning_rate);
            }
            let epoch_loss = self.full_loss(&encoded, distill.as_ref());
            if !epoch_loss.is_finite() {
                return Err(NeuralError::NonFiniteLoss { epoch, batch: order.len().div_ceil(config.batch_size), last_loss });
            }
            log.epoch_losses.push(epoch_loss);
        }
        Ok(log)
    }

    /// Number of trainable scalars, in the order `w1, b1, head, head_bias`.
    pub fn num_parameters(&self) -> usize {
        self.w1.len() + self.b1.len() + self.head.len() * self.spec.hidden + self.head_bias.len()
    }

    fn locate(&self, mut i: usize) -> (u8, usize, usize) {
        if i < self.w1.len() {
            return (0, i, 0);
        }
        i -= self.w1.len();
        if i < self.b1.len() {
            return (1, i, 0);
        }
        i -= self.b1.len();
        let h = self.spec.hidden;
        if i < self.head.len() * h {
            return (2, i / h, i % h);
        }
        (3, i - self.head.len() * h, 0)
    }

    pub fn parameter(&self, i: usize) -> f64 {
        match self.locate(i) {
            (0, j, _) => self.w1[j],
            (1, j, _) => self.b1[j],
            (2, r, c) => self.head[r][c],
            (_, j, _) => self.head_bias[j],
        }
    }

    pub fn set_parameter(&mut self, i: usize, value: f64) {
        match self.locate(i) {
            (0, j, _) => self.w1[j] = value,
            (1, j, _) => self.b1[j] = value,
            (2, r, c) => self.head[r][c] = value,
            (_, j, _) => self.head_bias[j] = value,
        }
    }

    /// Mean training objective over `data` and its dense gradient, laid out
    /// as in [`Self::num_parameters`]. Intended for small encoders.
    pub fn loss_and_gradient(
        &self,
        data: &[LabeledText],
        class_weights: Option<&[f64]>,
        distill: Option<Distillation<'_>>,
    ) -> Result<(f64, Vec<f64>), NeuralError> {
        let encoded = self.encode(data, class_weights, distill.as_ref())?;
        let batch: Vec<&Encoded> = encoded.iter().collect();
        let (loss, g) = self.batch_gradient(&batch, distill.as_ref());
        let h = self.spec.hidden;
        let mut dense = vec![0.0; self.num_parameters()];
        for (&j, row) in &g.w1_rows {
            dense[j as usize * h..(j as usize + 1) * h].copy_from_slice(row);
        }
        let mut off = self.w1.len();
        dense[off..off + h].copy_from_slice(&g.b1);
        off += h;
        for row in &g.head {
            dense[off..off + h].copy_from_slice(row);
            off += h;
        }
        dense[off..].copy_from_slice(&g.head_bias);
        Ok((loss, dense))
    }
}

/// Trains a fresh classifier on the sorted set of labels in `train`.
pub fn train_supervised(train: &[LabeledText], config: &TrainConfig, spec: EncoderSpec) -> Result<NeuralClassifier, NeuralError> {
    let mut classes: Vec<String> = train.iter().map(|e| e.label.clone()).collect();
    classes.sort();
    classes.dedup();
    train_supervised_with_classes(train, classes, config, spec)
}

/// Trains a fresh classifier with an explicit class order. Every class needs
/// at least one example.
pub fn train_supervised_with_classes(
    train: &[LabeledText],
    classes: Vec<String>,
    config: &TrainConfig,
    spec: EncoderSpec,
) -> Result<NeuralClassifier, NeuralError> {
    if classes.len() < 2 {
        return Err(NeuralError::TooFewClasses(classes.len()));
    }
    if let Some(empty) = classes.iter().find(|c| !train.iter().any(|e| &e.label == *c)) {
        return Err(NeuralError::EmptyClass(empty.clone()));
    }
    let mut model = NeuralClassifier::new(spec, classes, config.seed)?;
    model.fit(train, config, None)?;
    Ok(model)
}
