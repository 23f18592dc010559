//! F1-centric evaluation reports.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::corpus::Label;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum MetricsError {
    #[error("{preds} predictions but {labels} labels")]
    LengthMismatch { preds: usize, labels: usize },
    #[error("label {0:?} is not among the report classes")]
    UnknownClass(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Task {
    /// Human vs machine; headline F1 is the machine class.
    Binary,
    /// Generator attribution; headline F1 is the macro average.
    Attribution,
}

impl Task {
    /// The class a document is scored under for this task.
    pub fn target(&self, label: &Label) -> String {
        match self {
            Task::Binary => label.binary().to_string(),
            Task::Attribution => label.as_str().to_string(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum F1Mode<'a> {
    Positive(&'a str),
    Macro,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassMetrics {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub support: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FewShotInfo {
    pub k: usize,
    pub sample_ids: Vec<String>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ReportMetadata {
    pub config_hash: String,
    pub detector: String,
    pub n_train: usize,
    pub n_test: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub few_shot: Option<FewShotInfo>,
    #[serde(default)]
    pub notes: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub task: Task,
    pub classes: Vec<String>,
    pub per_class: BTreeMap<String, ClassMetrics>,
    pub macro_f1: f64,
    /// Machine-class F1 for binary reports, macro F1 for attribution.
    pub f1: f64,
    pub accuracy: f64,
    /// Rows are true classes, columns predictions, both in `classes` order.
    pub confusion: Vec<Vec<usize>>,
    pub metadata: ReportMetadata,
}

fn ratio(num: usize, den: usize) -> Option<f64> {
    (den > 0).then(|| num as f64 / den as f64)
}

fn class_metrics(tp: usize, predicted: usize, support: usize) -> (ClassMetrics, bool) {
    let p = ratio(tp, predicted);
    let r = ratio(tp, support);
    let (precision, recall) = (p.unwrap_or(0.0), r.unwrap_or(0.0));
    let f1 = if precision + recall > 0.0 { 2.0 * precision * recall / (precision + recall) } else { 0.0 };
    (ClassMetrics { precision, recall, f1, support }, p.is_none() || r.is_none())
}

/// F1 for one positive class, or the unweighted mean over every class seen in
/// either list. Undefined precision or recall counts as zero.
pub fn f1<S: AsRef<str>>(preds: &[S], labels: &[S], mode: F1Mode<'_>) -> Result<f64, MetricsError> {
    if preds.len() != labels.len() {
        return Err(MetricsError::LengthMismatch { preds: preds.len(), labels: labels.len() });
    }
    let score = |class: &str| {
        let tp = preds.iter().zip(labels).filter(|(p, l)| p.as_ref() == class && l.as_ref() == class).count();
        let predicted = preds.iter().filter(|p| p.as_ref() == class).count();
        let support = labels.iter().filter(|l| l.as_ref() == class).count();
        class_metrics(tp, predicted, support).0.f1
    };
    Ok(match mode {
        F1Mode::Positive(class) => score(class),
        F1Mode::Macro => {
            let classes: BTreeSet<&str> = preds.iter().chain(labels).map(|s| s.as_ref()).collect();
            if classes.is_empty() {
                0.0
            } else {
                classes.iter().map(|c| score(c)).sum::<f64>() / classes.len() as f64
            }
        }
    })
}

/// Builds a report over `classes` (or, when `None`, the sorted union of
/// predicted and true labels). Binary reports always list `human` and `machine`.
pub fn evaluate<S: AsRef<str>>(
    task: Task,
    classes: Option<&[String]>,
    preds: &[S],
    labels: &[S],
) -> Result<EvalReport, MetricsError> {
    if preds.len() != labels.len() {
        return Err(MetricsError::LengthMismatch { preds: preds.len(), labels: labels.len() });
    }
    let classes: Vec<String> = match (classes, task) {
        (Some(c), _) => c.to_vec(),
        (None, Task::Binary) => vec![Label::HUMAN.to_string(), Label::MACHINE.to_string()],
        (None, Task::Attribution) => preds
            .iter()
            .chain(labels)
            .map(|s| s.as_ref())
            .collect::<BTreeSet<_>>()
            .into_iter()
            .map(ToString::to_string)
            .collect(),
    };
    let index = |s: &str| classes.iter().position(|c| c == s).ok_or_else(|| MetricsError::UnknownClass(s.to_string()));
    let k = classes.len();
    let mut confusion = vec![vec![0usize; k]; k];
    for (p, l) in preds.iter().zip(labels) {
        confusion[index(l.as_ref())?][index(p.as_ref())?] += 1;
    }
    let mut per_class = BTreeMap::new();
    let mut notes = Vec::new();
    for (i, class) in classes.iter().enumerate() {
        let predicted: usize = (0..k).map(|r| confusion[r][i]).sum();
        let support: usize = confusion[i].iter().sum();
        let (m, undefined) = class_metrics(confusion[i][i], predicted, support);
        if undefined {
            notes.push(format!("precision or recall undefined for class {class:?}; counted as 0"));
        }
        per_class.insert(class.clone(), m);
    }
    let macro_f1 = if k == 0 { 0.0 } else { per_class.values().map(|m| m.f1).sum::<f64>() / k as f64 };
    let headline = match task {
        Task::Binary => per_class.get(Label::MACHINE).map_or(0.0, |m| m.f1),
        Task::Attribution => macro_f1,
    };
    let correct: usize = (0..k).map(|i| confusion[i][i]).sum();
    let accuracy = ratio(correct, preds.len()).unwrap_or(0.0);
    Ok(EvalReport {
        task,
        classes,
        per_class,
        macro_f1,
        f1: headline,
        accuracy,
        confusion,
        metadata: ReportMetadata { n_test: preds.len(), notes, ..ReportMetadata::default() },
    })
}

impl EvalReport {
    /// Macro F1 restricted to `subset` of the report classes.
    pub fn macro_f1_over(&self, subset: &[String]) -> f64 {
        let vals: Vec<f64> = subset.iter().filter_map(|c| self.per_class.get(c)).map(|m| m.f1).collect();
        if vals.is_empty() {
            0.0
        } else {
            vals.iter().sum::<f64>() / vals.len() as f64
        }
    }
}
