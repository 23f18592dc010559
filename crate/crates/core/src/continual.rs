//! Class-incremental updates of an attribution model: head expansion,
//! exemplar replay, distillation and post-hoc bias correction.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::math;
use crate::neural::{Distillation, Frozen, LabeledText, NeuralClassifier, NeuralError, TrainConfig, TrainLog};
use crate::seed;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ContinualError {
    #[error("{new} new logits cannot cover {old} old logits")]
    Dimension { new: usize, old: usize },
    #[error("class index {index} out of range for {classes} classes")]
    TargetOutOfRange { index: usize, classes: usize },
    #[error("class {0} has a zero count")]
    ZeroCount(usize),
    #[error("bias correction needs more than {old_n} logits, got {len}")]
    BiasBoundary { old_n: usize, len: usize },
    #[error("cannot select exemplars from an empty set")]
    NoDocuments,
    #[error("exemplar budget must be at least 1")]
    ZeroBudget,
    #[error("validation set has no example of class {0:?}")]
    MissingClass(String),
    #[error("update batch has no documents")]
    EmptyUpdate,
    #[error("{technique} replays exemplars but the exemplar store is empty")]
    NoExemplars { technique: Technique },
    #[error("unknown technique {0:?}")]
    UnknownTechnique(String),
    #[error(transparent)]
    Neural(#[from] NeuralError),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LwFConfig {
    pub lambda: f64,
    pub temperature: f64,
}

impl Default for LwFConfig {
    fn default() -> Self {
        LwFConfig { lambda: 0.2, temperature: 2.0 }
    }
}

/// `q_k = alpha * o_k + beta` for head indices `k >= old_n`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BiasCorrection {
    pub alpha: f64,
    pub beta: f64,
    pub old_n: usize,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExemplarStrategy {
    #[default]
    Herding,
    Random,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Technique {
    Normal,
    LwF,
    ICaRL,
    BiC,
    Combine,
}

impl Technique {
    pub const ALL: [Technique; 5] = [Technique::Normal, Technique::LwF, Technique::ICaRL, Technique::BiC, Technique::Combine];

    pub fn as_str(&self) -> &'static str {
        match self {
            Technique::Normal => "normal",
            Technique::LwF => "lwf",
            Technique::ICaRL => "icarl",
            Technique::BiC => "bic",
            Technique::Combine => "combine",
        }
    }

    pub fn replays(&self) -> bool {
        matches!(self, Technique::ICaRL | Technique::BiC | Technique::Combine)
    }

    pub fn distills(&self) -> bool {
        matches!(self, Technique::LwF | Technique::Combine)
    }

    pub fn corrects_bias(&self) -> bool {
        matches!(self, Technique::BiC | Technique::Combine)
    }
}

impl fmt::Display for Technique {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Technique {
    type Err = ContinualError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Technique::ALL
            .into_iter()
            .find(|t| t.as_str().eq_ignore_ascii_case(s))
            .ok_or_else(|| ContinualError::UnknownTechnique(s.to_string()))
    }
}

/// Stored representatives per class, at most `budget_per_class` each.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExemplarStore {
    pub budget_per_class: usize,
    pub per_class: BTreeMap<String, Vec<LabeledText>>,
}

impl ExemplarStore {
    pub fn new(budget_per_class: usize) -> Self {
        ExemplarStore { budget_per_class, per_class: BTreeMap::new() }
    }

    /// Selects exemplars for every class present in `docs`.
    pub fn build(
        model: &NeuralClassifier,
        docs: &[LabeledText],
        budget_per_class: usize,
        strategy: ExemplarStrategy,
        seed: u64,
    ) -> Result<Self, ContinualError> {
        let mut store = ExemplarStore::new(budget_per_class);
        store.refresh(model, docs, strategy, seed)?;
        Ok(store)
    }

    /// Replaces the exemplars of each class present in `docs`.
    pub fn refresh(
        &mut self,
        model: &NeuralClassifier,
        docs: &[LabeledText],
        strategy: ExemplarStrategy,
        seed: u64,
    ) -> Result<(), ContinualError> {
        let mut groups: BTreeMap<&str, Vec<LabeledText>> = BTreeMap::new();
        for d in docs {
            groups.entry(d.label.as_str()).or_default().push(d.clone());
        }
        for (class, members) in groups {
            let chosen = select_exemplars(
                |t| model.embed(t),
                &members,
                self.budget_per_class,
                strategy,
                seed::derive_seed(seed, class),
            )?;
            self.per_class.insert(class.to_string(), chosen);
        }
        Ok(())
    }

    pub fn is_empty(&self) -> bool {
        self.per_class.values().all(Vec::is_empty)
    }

    pub fn len(&self) -> usize {
        self.per_class.values().map(Vec::len).sum()
    }

    pub fn counts(&self) -> BTreeMap<String, usize> {
        self.per_class.iter().map(|(c, v)| (c.clone(), v.len())).collect()
    }

    pub fn all(&self) -> Vec<LabeledText> {
        self.per_class.values().flatten().cloned().collect()
    }

    /// Equal-size per-class sample: the first `min count` exemplars of each class.
    pub fn balanced(&self) -> Vec<LabeledText> {
        let m = self.per_class.values().map(Vec::len).min().unwrap_or(0);
        self.per_class.values().flat_map(|v| v[..m].iter().cloned()).collect()
    }
}

/// Herding over precomputed embeddings: greedily add the item that keeps the
/// running mean closest to the class mean. Ties go to the lowest index.
pub fn herding(embeddings: &[Vec<f64>], budget: usize) -> Vec<usize> {
    let n = embeddings.len();
    if n <= budget {
        return (0..n).collect();
    }
    let d = embeddings[0].len();
    let mut mean = vec![0.0; d];
    for e in embeddings {
        for (m, v) in mean.iter_mut().zip(e) {
            *m += v / n as f64;
        }
    }
    let mut chosen = Vec::with_capacity(budget);
    let mut taken = vec![false; n];
    let mut sum = vec![0.0; d];
    for step in 1..=budget {
        let mut best: Option<(usize, f64)> = None;
        for (i, e) in embeddings.iter().enumerate() {
            if taken[i] {
                continue;
            }
            let dist: f64 = (0..d)
                .map(|j| {
                    let diff = mean[j] - (sum[j] + e[j]) / step as f64;
                    diff * diff
                })
                .sum();
            if best.is_none_or(|(_, b)| dist < b) {
                best = Some((i, dist));
            }
        }
        let (i, _) = best.expect("budget below item count");
        taken[i] = true;
        for (s, v) in sum.iter_mut().zip(&embeddings[i]) {
            *s += v;
        }
        chosen.push(i);
    }
    chosen
}

/// Chooses up to `budget` representatives of `docs`; all of them when they fit.
pub fn select_exemplars<E>(
    embed: E,
    docs: &[LabeledText],
    budget: usize,
    strategy: ExemplarStrategy,
    seed: u64,
) -> Result<Vec<LabeledText>, ContinualError>
where
    E: Fn(&str) -> Vec<f64>,
{
    if docs.is_empty() {
        return Err(ContinualError::NoDocuments);
    }
    if budget == 0 {
        return Err(ContinualError::ZeroBudget);
    }
    if docs.len() <= budget {
        return Ok(docs.to_vec());
    }
    let picks = match strategy {
        ExemplarStrategy::Herding => {
            let emb: Vec<Vec<f64>> = docs.iter().map(|d| embed(&d.text)).collect();
            herding(&emb, budget)
        }
        ExemplarStrategy::Random => {
            let mut idx: Vec<usize> = (0..docs.len()).collect();
            idx.shuffle(&mut seed::derived_rng(seed, "exemplars"));
            idx.truncate(budget);
            idx
        }
    };
    Ok(picks.into_iter().map(|i| docs[i].clone()).collect())
}

fn cross_entropy(logits: &[f64], target: usize) -> Result<f64, ContinualError> {
    if target >= logits.len() {
        return Err(ContinualError::TargetOutOfRange { index: target, classes: logits.len() });
    }
    Ok(-math::log_softmax(logits)[target])
}

/// `T^2 * KL(softmax(old / T) || softmax(new[..old.len()] / T))`.
pub fn distillation_term(new_logits: &[f64], old_logits: &[f64], temperature: f64) -> Result<f64, ContinualError> {
    if old_logits.len() > new_logits.len() {
        return Err(ContinualError::Dimension { new: new_logits.len(), old: old_logits.len() });
    }
    let p = math::softmax_t(old_logits, temperature);
    let scaled: Vec<f64> = new_logits[..old_logits.len()].iter().map(|z| z / temperature).collect();
    let logq = math::log_softmax(&scaled);
    let kl: f64 = p.iter().zip(&logq).filter(|(pi, _)| **pi > 0.0).map(|(pi, lq)| pi * (math::ln(*pi) - lq)).sum();
    Ok(temperature * temperature * kl)
}

/// Cross-entropy plus `lambda` times the distillation term. With `lambda == 0`
/// the result is exactly the cross-entropy.
pub fn lwf_loss(new_logits: &[f64], old_logits: &[f64], target: usize, cfg: &LwFConfig) -> Result<f64, ContinualError> {
    if old_logits.len() > new_logits.len() {
        return Err(ContinualError::Dimension { new: new_logits.len(), old: old_logits.len() });
    }
    let ce = cross_entropy(new_logits, target)?;
    if cfg.lambda == 0.0 {
        return Ok(ce);
    }
    Ok(ce + cfg.lambda * distillation_term(new_logits, old_logits, cfg.temperature)?)
}

/// `w_c = N / (K * n_c)`.
pub fn class_weights(counts: &[usize]) -> Result<Vec<f64>, ContinualError> {
    if let Some(c) = counts.iter().position(|&n| n == 0) {
        return Err(ContinualError::ZeroCount(c));
    }
    let total: usize = counts.iter().sum();
    let k = counts.len() as f64;
    Ok(counts.iter().map(|&n| total as f64 / (k * n as f64)).collect())
}

/// Cross-entropy scaled by the target's inverse-frequency weight.
pub fn weighted_ce(logits: &[f64], target: usize, counts: &[usize]) -> Result<f64, ContinualError> {
    if counts.len() != logits.len() {
        return Err(ContinualError::Dimension { new: logits.len(), old: counts.len() });
    }
    let ce = cross_entropy(logits, target)?;
    Ok(class_weights(counts)?[target] * ce)
}

/// Applies the affine correction to indices `>= old_n`; earlier entries are copied.
pub fn bic_correct(logits: &[f64], bc: &BiasCorrection) -> Result<Vec<f64>, ContinualError> {
    if bc.old_n >= logits.len() {
        return Err(ContinualError::BiasBoundary { old_n: bc.old_n, len: logits.len() });
    }
    Ok(logits
        .iter()
        .enumerate()
        .map(|(k, &o)| if k < bc.old_n { o } else { bc.alpha * o + bc.beta })
        .collect())
}

fn bic_objective(logits: &[Vec<f64>], targets: &[usize], old_n: usize, alpha: f64, beta: f64) -> (f64, [f64; 2], [[f64; 2]; 2]) {
    let n = logits.len() as f64;
    let mut loss = 0.0;
    let mut g = [0.0; 2];
    let mut h = [[0.0; 2]; 2];
    let mut q = Vec::new();
    for (o, &y) in logits.iter().zip(targets) {
        q.clear();
        q.extend(o.iter().enumerate().map(|(k, &v)| if k < old_n { v } else { alpha * v + beta }));
        let logp = math::log_softmax(&q);
        loss -= logp[y];
        let (mut spo, mut sp, mut spo2) = (0.0, 0.0, 0.0);
        for k in old_n..o.len() {
            let p = math::exp(logp[k]);
            spo += p * o[k];
            sp += p;
            spo2 += p * o[k] * o[k];
        }
        let (yo, yb) = if y >= old_n { (o[y], 1.0) } else { (0.0, 0.0) };
        g[0] += spo - yo;
        g[1] += sp - yb;
        h[0][0] += spo2 - spo * spo;
        h[0][1] += spo - spo * sp;
        h[1][1] += sp - sp * sp;
    }
    h[1][0] = h[0][1];
    (loss / n, [g[0] / n, g[1] / n], [[h[0][0] / n, h[0][1] / n], [h[1][0] / n, h[1][1] / n]])
}

/// Fits `(alpha, beta)` minimizing mean cross-entropy of corrected logits by
/// damped Newton steps from the identity correction.
pub fn fit_bic_logits(logits: &[Vec<f64>], targets: &[usize], old_n: usize) -> Result<BiasCorrection, ContinualError> {
    let width = logits.first().map_or(0, Vec::len);
    if old_n >= width {
        return Err(ContinualError::BiasBoundary { old_n, len: width });
    }
    if let Some(&t) = targets.iter().find(|&&t| t >= width) {
        return Err(ContinualError::TargetOutOfRange { index: t, classes: width });
    }
    let (mut alpha, mut beta) = (1.0, 0.0);
    let (mut loss, mut g, mut h) = bic_objective(logits, targets, old_n, alpha, beta);
    for _ in 0..100 {
        if g[0].abs().max(g[1].abs()) < 1e-12 {
            break;
        }
        let ridge = 1e-12 * (1.0 + h[0][0].abs() + h[1][1].abs());
        let (a, b, d) = (h[0][0] + ridge, h[0][1], h[1][1] + ridge);
        let det = a * d - b * b;
        let (mut da, mut db) = if det > 0.0 { (-(d * g[0] - b * g[1]) / det, -(a * g[1] - b * g[0]) / det) } else { (-g[0], -g[1]) };
        let mut step_taken = false;
        for _ in 0..50 {
            let (na, nb) = (alpha + da, beta + db);
            let (nl, ng, nh) = bic_objective(logits, targets, old_n, na, nb);
            if nl <= loss {
                step_taken = nl < loss || (na, nb) != (alpha, beta);
                alpha = na;
                beta = nb;
                loss = nl;
                g = ng;
                h = nh;
                break;
            }
            da *= 0.5;
            db *= 0.5;
        }
        if !step_taken {
            break;
        }
    }
    Ok(BiasCorrection { alpha, beta, old_n })
}

/// Fits a bias correction for `model` on a validation set containing every class.
pub fn fit_bic(model: &NeuralClassifier, validation: &[LabeledText], old_n: usize) -> Result<BiasCorrection, ContinualError> {
    for class in &model.classes {
        if !validation.iter().any(|v| &v.label == class) {
            return Err(ContinualError::MissingClass(class.clone()));
        }
    }
    let mut logits = Vec::with_capacity(validation.len());
    let mut targets = Vec::with_capacity(validation.len());
    for v in validation {
        logits.push(model.predict_logits(&v.text));
        targets.push(model.class_index(&v.label).ok_or_else(|| NeuralError::UnknownLabel(v.label.clone()))?);
    }
    fit_bic_logits(&logits, &targets, old_n)
}

/// Copy of `model` with `new_label` appended and a zero output row.
pub fn expand_head(model: &NeuralClassifier, new_label: &str) -> Result<NeuralClassifier, ContinualError> {
    let mut m = model.clone();
    m.add_class(new_label)?;
    Ok(m)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CilConfig {
    pub base_learning_rate: f64,
    /// Overrides the default update rate of `base_learning_rate / 4`.
    pub update_learning_rate: Option<f64>,
    pub update_epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
    pub lwf: LwFConfig,
    pub budget_per_class: usize,
    pub strategy: ExemplarStrategy,
}

impl Default for CilConfig {
    fn default() -> Self {
        CilConfig {
            base_learning_rate: 5e-6,
            update_learning_rate: None,
            update_epochs: 1,
            batch_size: 64,
            seed: 3407,
            lwf: LwFConfig::default(),
            budget_per_class: 100,
            strategy: ExemplarStrategy::Herding,
        }
    }
}

impl CilConfig {
    /// A fixed update rate of 2.5e-7 instead of a quarter of the base rate.
    pub fn slow_update() -> Self {
        CilConfig { update_learning_rate: Some(2.5e-7), ..CilConfig::default() }
    }

    pub fn update_lr(&self) -> f64 {
        self.update_learning_rate.unwrap_or(self.base_learning_rate / 4.0)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CILState {
    pub model: NeuralClassifier,
    pub exemplars: ExemplarStore,
    pub old_snapshot: Option<Frozen>,
    pub bias_correction: Option<BiasCorrection>,
    pub stage: usize,
    /// Training log of the most recent update.
    pub last_log: Option<TrainLog>,
}

impl CILState {
    pub fn new(model: NeuralClassifier, exemplars: ExemplarStore) -> Self {
        CILState { model, exemplars, old_snapshot: None, bias_correction: None, stage: 0, last_log: None }
    }

    pub fn classes(&self) -> &[String] {
        &self.model.classes
    }

    /// Model logits with the bias correction applied when one is attached.
    pub fn predict_logits(&self, text: &str) -> Vec<f64> {
        let z = self.model.predict_logits(text);
        match &self.bias_correction {
            Some(bc) if bc.old_n < z.len() => bic_correct(&z, bc).unwrap_or(z),
            _ => z,
        }
    }

    pub fn predict(&self, text: &str) -> &str {
        let z = self.predict_logits(text);
        &self.model.classes[math::argmax(&z).unwrap_or(0)]
    }
}

/// One class-incremental stage: snapshot, head expansion, one short training
/// pass on the new documents (plus replayed exemplars and inverse-frequency
/// weights for replay techniques, plus distillation for LwF and Combine),
/// exemplar refresh for the new classes and, for BiC and Combine, a bias
/// correction fitted on the balanced exemplar set.
pub fn cil_update(
    state: &CILState,
    new_docs: &[LabeledText],
    technique: Technique,
    config: &CilConfig,
) -> Result<CILState, ContinualError> {
    if new_docs.is_empty() {
        return Err(ContinualError::EmptyUpdate);
    }
    if technique.replays() && state.exemplars.is_empty() {
        return Err(ContinualError::NoExemplars { technique });
    }
    let mut new_labels: Vec<&str> = new_docs.iter().map(|d| d.label.as_str()).collect();
    new_labels.sort_unstable();
    new_labels.dedup();

    let snapshot = state.model.snapshot();
    let old_n = state.model.num_classes();
    let mut model = state.model.clone();
    for label in &new_labels {
        model.add_class(label)?;
    }

    let mut update: Vec<LabeledText> = new_docs.to_vec();
    let mut class_weights_vec = None;
    if technique.replays() {
        update.extend(state.exemplars.all());
        let counts: Vec<usize> = model
            .classes
            .iter()
            .map(|c| update.iter().filter(|d| &d.label == c).count())
            .collect();
        // Classes absent from the update set contribute no loss either way.
        let present: Vec<usize> = counts.iter().copied().filter(|&n| n > 0).collect();
        let w = class_weights(&present)?;
        let mut it = w.into_iter();
        class_weights_vec = Some(counts.iter().map(|&n| if n > 0 { it.next().unwrap_or(0.0) } else { 0.0 }).collect());
    }

    let train = TrainConfig {
        learning_rate: config.update_lr(),
        batch_size: config.batch_size,
        epochs: config.update_epochs,
        seed: seed::derive_seed(config.seed, &format!("cil-stage-{}", state.stage)),
        class_weights: class_weights_vec,
    };
    let distill = technique.distills().then(|| Distillation {
        teacher: &snapshot,
        lambda: config.lwf.lambda,
        temperature: config.lwf.temperature,
    });
    let log = model.fit(&update, &train, distill)?;

    let mut exemplars = state.exemplars.clone();
    if technique.replays() {
        exemplars.refresh(&model, new_docs, config.strategy, seed::derive_seed(config.seed, "exemplars"))?;
    }
    let bias_correction = if technique.corrects_bias() {
        Some(fit_bic(&model, &exemplars.balanced(), old_n)?)
    } else {
        None
    };
    Ok(CILState {
        model,
        exemplars,
        old_snapshot: Some(snapshot),
        bias_correction,
        stage: state.stage + 1,
        last_log: Some(log),
    })
}
