use alloc::collections::BTreeMap;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::{BenchError, Detector, DetectorKind, Env, ExperimentConfig, Registry};
use crate::corpus::{split_train_test, Document};
use crate::metrics::{evaluate, EvalReport, FewShotInfo};
use crate::seed;

/// Train and test documents after splitting and capping.
#[derive(Debug, Clone, PartialEq)]
pub struct PreparedSplit {
    pub train: Vec<Document>,
    pub test: Vec<Document>,
}

fn cap(mut docs: Vec<Document>, limit: usize, seed: u64, name: &str) -> Vec<Document> {
    if docs.len() > limit {
        docs.shuffle(&mut seed::derived_rng(seed, name));
        docs.truncate(limit);
    }
    docs
}

/// Seeded stratified split followed by the caps for `kind`.
pub fn prepare_split(corpus: &[Document], config: &ExperimentConfig, kind: DetectorKind) -> Result<PreparedSplit, BenchError> {
    let split = split_train_test(corpus, config.split_ratio, config.seed)?;
    let train_cap = match kind {
        DetectorKind::Metric => config.caps.zero_shot_train,
        DetectorKind::Supervised => config.caps.supervised_train,
    };
    Ok(PreparedSplit {
        train: cap(split.train, train_cap, config.seed, "cap-train"),
        test: cap(split.test, config.caps.test, config.seed, "cap-test"),
    })
}

fn score(
    detector: &dyn Detector,
    test: &[Document],
    n_train: usize,
    config: &ExperimentConfig,
    env: &Env<'_>,
) -> Result<EvalReport, BenchError> {
    let preds = detector.predict(test, env)?;
    let labels: Vec<String> = test.iter().map(|d| config.task.target(&d.label)).collect();
    let mut report = evaluate(config.task, None, &preds, &labels)?;
    report.metadata.config_hash = config.config_hash(detector.name());
    report.metadata.detector = detector.name().to_string();
    report.metadata.n_train = n_train;
    Ok(report)
}

/// Fit on the training split of `corpus` and evaluate on its test split.
pub fn run_in_distribution(
    registry: &Registry,
    detector: &str,
    corpus: &[Document],
    config: &ExperimentConfig,
    env: &Env<'_>,
) -> Result<EvalReport, BenchError> {
    let mut det = registry.detector(detector, config)?;
    let split = prepare_split(corpus, config, det.kind())?;
    det.fit(&split.train, env)?;
    score(det.as_ref(), &split.test, split.train.len(), config, env)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Axis {
    Domain,
    Llm,
}

impl Axis {
    pub fn as_str(&self) -> &'static str {
        match self {
            Axis::Domain => "domain",
            Axis::Llm => "llm",
        }
    }
}

/// Metrics emitted per cell by [`TransferMatrix::long_format`].
pub const MATRIX_METRICS: [&str; 3] = ["f1", "macro_f1", "accuracy"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LongRow {
    pub source: String,
    pub target: String,
    pub metric: String,
    pub value: f64,
}

/// Reports indexed by `[source][target]`; sources and targets share one order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransferMatrix {
    pub axis: Axis,
    pub detector: String,
    pub sources: Vec<String>,
    pub targets: Vec<String>,
    pub cells: Vec<Vec<EvalReport>>,
}

impl TransferMatrix {
    pub fn cell(&self, source: &str, target: &str) -> Option<&EvalReport> {
        let s = self.sources.iter().position(|x| x == source)?;
        let t = self.targets.iter().position(|x| x == target)?;
        Some(&self.cells[s][t])
    }

    pub fn f1_grid(&self) -> Vec<Vec<f64>> {
        self.cells.iter().map(|row| row.iter().map(|r| r.f1).collect()).collect()
    }

    pub fn long_format(&self) -> Vec<LongRow> {
        let mut rows = Vec::new();
        for (s, row) in self.sources.iter().zip(&self.cells) {
            for (t, report) in self.targets.iter().zip(row) {
                for (metric, value) in MATRIX_METRICS.iter().zip([report.f1, report.macro_f1, report.accuracy]) {
                    rows.push(LongRow { source: s.clone(), target: t.clone(), metric: metric.to_string(), value });
                }
            }
        }
        rows
    }
}

/// Train once per source corpus and evaluate on every target's test split.
/// The split of each corpus is the one [`run_in_distribution`] would use, so
/// the diagonal matches in-distribution results.
pub fn run_transfer(
    registry: &Registry,
    detector: &str,
    corpora: &BTreeMap<String, Vec<Document>>,
    axis: Axis,
    config: &ExperimentConfig,
    env: &Env<'_>,
) -> Result<TransferMatrix, BenchError> {
    if corpora.len() < 2 {
        return Err(BenchError::NeedTwoCorpora(corpora.len()));
    }
    let kind = registry.detector(detector, config)?.kind();
    let splits: Vec<PreparedSplit> = corpora.values().map(|c| prepare_split(c, config, kind)).collect::<Result<_, _>>()?;
    let mut cells = Vec::with_capacity(splits.len());
    let mut name = String::new();
    for source in &splits {
        let mut det = registry.detector(detector, config)?;
        det.fit(&source.train, env)?;
        name = det.name().to_string();
        let row = splits
            .iter()
            .map(|target| score(det.as_ref(), &target.test, source.train.len(), config, env))
            .collect::<Result<Vec<_>, _>>()?;
        cells.push(row);
    }
    let names: Vec<String> = corpora.keys().cloned().collect();
    Ok(TransferMatrix { axis, detector: name, sources: names.clone(), targets: names, cells })
}

/// Adds `k` seeded training documents per target class to the source training
/// set, fits, and evaluates on the target test split.
pub fn run_few_shot(
    registry: &Registry,
    detector: &str,
    source: &[Document],
    target: &[Document],
    k: usize,
    config: &ExperimentConfig,
    env: &Env<'_>,
) -> Result<EvalReport, BenchError> {
    let mut det = registry.detector(detector, config)?;
    let src = prepare_split(source, config, det.kind())?;
    let tgt = prepare_split(target, config, det.kind())?;

    let mut by_class: BTreeMap<String, Vec<&Document>> = BTreeMap::new();
    for d in &tgt.train {
        by_class.entry(config.task.target(&d.label)).or_default().push(d);
    }
    let mut shots: Vec<Document> = Vec::new();
    for (class, mut docs) in by_class {
        if k > docs.len() {
            return Err(BenchError::FewShotTooLarge { class, k, available: docs.len() });
        }
        docs.shuffle(&mut seed::derived_rng(config.seed, &alloc::format!("few-shot-{class}")));
        shots.extend(docs[..k].iter().map(|d| (*d).clone()));
    }
    let ids: Vec<String> = shots.iter().map(|d| d.id.clone()).collect();
    let mut train = src.train;
    train.extend(shots);
    det.fit(&train, env)?;
    let mut report = score(det.as_ref(), &tgt.test, train.len(), config, env)?;
    if k > 0 {
        report.metadata.few_shot = Some(FewShotInfo { k, sample_ids: ids });
    }
    Ok(report)
}
