use alloc::collections::BTreeMap;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::{BenchError, ExperimentConfig};
use crate::continual::{cil_update, CILState, ExemplarStore, Technique};
use crate::corpus::{split_train_test, Document};
use crate::metrics::{evaluate, EvalReport, Task};
use crate::neural::{train_supervised_with_classes, LabeledText, NeuralClassifier, TrainConfig};

/// Evaluation of one model on the balanced test set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageReport {
    pub technique: String,
    pub stage: usize,
    pub head_dim: usize,
    pub old_macro_f1: f64,
    pub new_macro_f1: f64,
    pub report: EvalReport,
}

/// Record of one incremental update.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub technique: String,
    pub config_hash: String,
    pub classes_added: Vec<String>,
    pub f1_before: BTreeMap<String, f64>,
    pub f1_after: BTreeMap<String, f64>,
    pub exemplar_counts: BTreeMap<String, usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CilRun {
    pub old_classes: Vec<String>,
    pub new_classes: Vec<String>,
    pub base: StageReport,
    pub updates: Vec<StageReport>,
    /// All classes trained together from scratch.
    pub joint: StageReport,
    pub manifest: Vec<ManifestEntry>,
}

impl CilRun {
    pub fn update(&self, technique: Technique) -> Option<&StageReport> {
        self.updates.iter().find(|u| u.technique == technique.as_str())
    }
}

fn labeled(docs: &[Document]) -> Vec<LabeledText> {
    docs.iter().map(|d| LabeledText::new(d.text.clone(), d.label.as_str())).collect()
}

/// Truncates every class to the size of the smallest one, keeping order.
fn balance(docs: Vec<LabeledText>) -> Vec<LabeledText> {
    let mut counts: BTreeMap<String, usize> = BTreeMap::new();
    for d in &docs {
        *counts.entry(d.label.clone()).or_default() += 1;
    }
    let m = counts.values().copied().min().unwrap_or(0);
    let mut taken: BTreeMap<String, usize> = BTreeMap::new();
    docs.into_iter()
        .filter(|d| {
            let n = taken.entry(d.label.clone()).or_default();
            *n += 1;
            *n <= m
        })
        .collect()
}

fn stage_report<F: Fn(&str) -> String>(
    technique: &str,
    stage: usize,
    classes: &[String],
    old: &[String],
    new: &[String],
    test: &[LabeledText],
    predict: F,
) -> Result<StageReport, BenchError> {
    let docs: Vec<&LabeledText> = test.iter().filter(|d| classes.contains(&d.label)).collect();
    let preds: Vec<String> = docs.iter().map(|d| predict(&d.text)).collect();
    let labels: Vec<String> = docs.iter().map(|d| d.label.clone()).collect();
    let report = evaluate(Task::Attribution, Some(classes), &preds, &labels)?;
    Ok(StageReport {
        technique: technique.to_string(),
        stage,
        head_dim: classes.len(),
        old_macro_f1: report.macro_f1_over(old),
        new_macro_f1: report.macro_f1_over(new),
        report,
    })
}

fn per_class_f1(r: &StageReport) -> BTreeMap<String, f64> {
    r.report.per_class.iter().map(|(c, m)| (c.clone(), m.f1)).collect()
}

/// Class-incremental benchmark: train a base model on every class outside
/// `new_labels`, add the new classes with each technique, and compare against
/// a jointly trained model. All evaluations use one class-balanced test set.
pub fn run_cil(
    corpus: &[Document],
    new_labels: &[String],
    techniques: &[Technique],
    config: &ExperimentConfig,
) -> Result<CilRun, BenchError> {
    let split = split_train_test(corpus, config.split_ratio, config.seed)?;
    let train = labeled(&split.train);
    let test = balance(labeled(&split.test));

    let mut all: Vec<String> = train.iter().map(|d| d.label.clone()).collect();
    all.sort();
    all.dedup();
    for l in new_labels {
        if !all.contains(l) {
            return Err(BenchError::Cil(alloc::format!("new class {l:?} has no training documents")));
        }
    }
    let old: Vec<String> = all.iter().filter(|c| !new_labels.contains(c)).cloned().collect();
    let mut new: Vec<String> = new_labels.to_vec();
    new.sort();
    new.dedup();
    if new.is_empty() {
        return Err(BenchError::Cil("no new classes".into()));
    }

    let base_cfg = TrainConfig {
        learning_rate: config.cil.base_learning_rate,
        batch_size: config.cil.batch_size,
        epochs: config.cil_base_epochs,
        seed: config.cil.seed,
        class_weights: None,
    };
    let old_train: Vec<LabeledText> = train.iter().filter(|d| old.contains(&d.label)).cloned().collect();
    let new_train: Vec<LabeledText> = train.iter().filter(|d| new.contains(&d.label)).cloned().collect();

    let base_model = train_supervised_with_classes(&old_train, old.clone(), &base_cfg, config.encoder)?;
    let exemplars = ExemplarStore::build(
        &base_model,
        &old_train,
        config.cil.budget_per_class,
        config.cil.strategy,
        config.cil.seed,
    )?;
    let base = stage_report("base", 0, &old, &old, &[], &test, |t| base_model.predict(t).to_string())?;
    let base_state = CILState::new(base_model, exemplars);

    let mut updates = Vec::with_capacity(techniques.len());
    let mut manifest = Vec::with_capacity(techniques.len());
    for &technique in techniques {
        let state = cil_update(&base_state, &new_train, technique, &config.cil)?;
        let classes = state.classes().to_vec();
        let report = stage_report(technique.as_str(), 1, &classes, &old, &new, &test, |t| state.predict(t).to_string())?;
        manifest.push(ManifestEntry {
            technique: technique.as_str().to_string(),
            config_hash: config.config_hash(technique.as_str()),
            classes_added: new.clone(),
            f1_before: per_class_f1(&base),
            f1_after: per_class_f1(&report),
            exemplar_counts: state.exemplars.counts(),
        });
        updates.push(report);
    }

    let mut joint_classes = old.clone();
    joint_classes.extend(new.iter().cloned());
    let joint_model: NeuralClassifier = train_supervised_with_classes(&train, joint_classes.clone(), &base_cfg, config.encoder)?;
    let joint = stage_report("joint", 1, &joint_classes, &old, &new, &test, |t| joint_model.predict(t).to_string())?;

    Ok(CilRun { old_classes: old, new_classes: new, base, updates, joint, manifest })
}
