//! Orchestration shared by the CLI and declarative runs.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use mgtbench_core::bench::{self, Axis, BenchError, Detector, Env, ExperimentConfig, ExperimentKind, MetricDetectorImpl, Registry};
use mgtbench_core::continual::Technique;
use mgtbench_core::corpus::{moderate, moderate_human, moderate_machine, truncate_to_sentence, Document, ModerationPolicy, Rejection, Verdict};
use mgtbench_core::decision::{LinearModel, ThresholdRule};
use mgtbench_core::detectors::{Backends, MetricDetector, MetricOptions};
use serde::{Deserialize, Serialize};

use crate::backend::{open_backend, BackendSpec, DynBackend};
use crate::cache::ScoreCache;
use crate::config::{RunSpec, Settings};
use crate::io::{self, FeatureRow};
use crate::report::{write_json, Format, Results};
use crate::{Error, Result};

/// Which moderation rules to apply.
#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum SplitMode {
    Human,
    /// Sentence truncation followed by the machine rules, whatever the label.
    Machine,
    /// Chosen per document from its label.
    Auto,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Moderated {
    pub kept: Vec<Document>,
    pub rejected: Vec<(String, Rejection)>,
}

pub fn moderate_corpus(docs: &[Document], policy: &ModerationPolicy, mode: SplitMode) -> Moderated {
    let mut out = Moderated::default();
    for doc in docs {
        let verdict = match mode {
            SplitMode::Auto => moderate(doc, policy),
            SplitMode::Human => moderate_human(doc, policy),
            SplitMode::Machine => match truncate_to_sentence(&doc.text, policy.max_tokens) {
                Ok(text) => moderate_machine(&Document { text, ..doc.clone() }, policy),
                Err(r) => Verdict::Reject(r),
            },
        };
        match verdict {
            Verdict::Keep(d) => out.kept.push(d),
            Verdict::Reject(r) => out.rejected.push((doc.id.clone(), r)),
        }
    }
    out
}

/// Primary and optional secondary scorer, sharing one cache.
#[derive(Default)]
pub struct LoadedBackends {
    pub primary: Option<DynBackend>,
    pub secondary: Option<DynBackend>,
    pub cache: Option<Arc<ScoreCache>>,
}

impl LoadedBackends {
    /// Relative `unigram:` paths resolve against `base`.
    pub fn open(primary: Option<&str>, secondary: Option<&str>, cache_dir: Option<&Path>, base: &Path) -> Result<Self> {
        if secondary.is_some() && primary.is_none() {
            return Err(Error::Config("a secondary backend needs a primary backend".into()));
        }
        let cache = cache_dir
            .map(|d| ScoreCache::open(d).map(Arc::new).map_err(|e| Error::io(d, e)))
            .transpose()?;
        let open = |spec: &str| -> Result<DynBackend> {
            let spec = match BackendSpec::parse(spec)? {
                BackendSpec::Unigram(p) if p.is_relative() => BackendSpec::Unigram(base.join(p)),
                other => other,
            };
            open_backend(&spec, cache.clone())
        };
        Ok(LoadedBackends {
            primary: primary.map(open).transpose()?,
            secondary: secondary.map(open).transpose()?,
            cache,
        })
    }

    pub fn backends(&self) -> Option<Backends<'_>> {
        let p = self.primary.as_deref()?;
        Some(match self.secondary.as_deref() {
            Some(s) => Backends::pair(p, s),
            None => Backends::single(p),
        })
    }

    pub fn env(&self) -> Env<'_> {
        Env { backends: self.backends() }
    }
}

pub fn metric_by_name(name: &str) -> Result<MetricDetector> {
    MetricDetector::ALL
        .into_iter()
        .find(|m| m.name().eq_ignore_ascii_case(name))
        .ok_or_else(|| BenchError::UnknownDetector(name.to_string()).into())
}

/// Computes every detector's features for every document, document-major.
/// With `jobs > 1` documents are scored on scoped threads; the output order
/// does not depend on `jobs`.
pub fn score_corpus(
    docs: &[Document],
    backends: &LoadedBackends,
    metrics: &[MetricDetector],
    options: MetricOptions,
    jobs: usize,
) -> Result<Vec<FeatureRow>> {
    let missing = || BenchError::MissingBackend(metrics.first().map_or("score", |m| m.name()).to_string());
    backends.backends().ok_or_else(missing)?;
    let score_chunk = |chunk: &[Document]| -> Result<Vec<FeatureRow>> {
        let b = backends.backends().ok_or_else(missing)?;
        let mut rows = Vec::with_capacity(chunk.len() * metrics.len());
        for doc in chunk {
            for m in metrics {
                let features = m.compute(&b, &doc.text, options).map_err(BenchError::from)?;
                rows.push(FeatureRow { id: doc.id.clone(), detector: m.name().to_string(), features });
            }
        }
        Ok(rows)
    };
    let jobs = jobs.max(1);
    if jobs == 1 || docs.len() < 2 {
        return score_chunk(docs);
    }
    let size = docs.len().div_ceil(jobs);
    let parts: Vec<Result<Vec<FeatureRow>>> = std::thread::scope(|s| {
        let handles: Vec<_> = docs.chunks(size).map(|c| s.spawn(move || score_chunk(c))).collect();
        handles.into_iter().map(|h| h.join().expect("scoring thread panicked")).collect()
    });
    let mut rows = Vec::new();
    for part in parts {
        rows.extend(part?);
    }
    Ok(rows)
}

/// A fitted metric-detector decision rule.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Calibration {
    Threshold(ThresholdRule),
    Linear(LinearModel),
}

/// Fits the configured decision rule of `metric` on all of `docs`.
pub fn calibrate(docs: &[Document], metric: MetricDetector, config: &ExperimentConfig, env: &Env<'_>) -> Result<Calibration> {
    let mut det = MetricDetectorImpl::new(metric, config)?;
    det.fit(docs, env)?;
    if let Some(r) = det.threshold_rule() {
        return Ok(Calibration::Threshold(r.clone()));
    }
    let model = det.linear_model().ok_or_else(|| BenchError::NotFitted(metric.name().to_string()))?;
    Ok(Calibration::Linear(model.clone()))
}

pub fn parse_axis(s: &str) -> Result<Axis> {
    match s.to_ascii_lowercase().as_str() {
        "domain" => Ok(Axis::Domain),
        "llm" => Ok(Axis::Llm),
        other => Err(Error::Config(format!("unknown axis {other:?} (expected domain or llm)"))),
    }
}

pub fn parse_techniques(names: &[String]) -> Result<Vec<Technique>> {
    if names.is_empty() {
        return Ok(Technique::ALL.to_vec());
    }
    names.iter().map(|n| n.parse::<Technique>().map_err(|e| Error::Config(e.to_string()))).collect()
}

/// Reads `name=path` corpora (or bare paths, named by file stem).
pub fn read_named_corpora<'a>(items: impl IntoIterator<Item = (String, &'a Path)>) -> Result<BTreeMap<String, Vec<Document>>> {
    let mut out = BTreeMap::new();
    for (name, path) in items {
        if out.insert(name.clone(), io::read_corpus(path)?).is_some() {
            return Err(Error::Config(format!("corpus name {name:?} given twice")));
        }
    }
    Ok(out)
}

pub fn parse_named_path(item: &str) -> (String, PathBuf) {
    match item.split_once('=') {
        Some((name, path)) if !name.is_empty() => (name.to_string(), PathBuf::from(path)),
        _ => {
            let p = PathBuf::from(item);
            let stem = p.file_stem().map_or_else(|| item.to_string(), |s| s.to_string_lossy().into_owned());
            (stem, p)
        }
    }
}

fn single_corpus(settings: &Settings, run: &RunSpec) -> Result<Vec<Document>> {
    match (run.corpora.len(), &run.source) {
        (1, _) => io::read_corpus(&settings.resolve(run.corpora.values().next().unwrap())),
        (0, Some(p)) => io::read_corpus(&settings.resolve(p)),
        (n, _) => Err(Error::Config(format!("protocol {:?} takes one corpus, got {n}", run.protocol))),
    }
}

fn need<'a, T>(value: Option<&'a T>, field: &str, protocol: &str) -> Result<&'a T> {
    value.ok_or_else(|| Error::Config(format!("[run] {field} is required for protocol {protocol:?}")))
}

/// Executes the declarative run in `settings`.
pub fn execute(settings: &Settings, registry: &Registry, backends: &LoadedBackends) -> Result<Results> {
    let run = settings.run.as_ref().ok_or_else(|| Error::Config("no [run] section".into()))?;
    let config = &settings.experiment;
    let env = backends.env();
    let detector = || need(run.detector.as_ref(), "detector", &run.protocol);
    Ok(match registry.experiment(&run.protocol)? {
        ExperimentKind::InDistribution => {
            Results::Eval(bench::run_in_distribution(registry, detector()?, &single_corpus(settings, run)?, config, &env)?)
        }
        ExperimentKind::Transfer => {
            let axis = parse_axis(need(run.axis.as_ref(), "axis", &run.protocol)?)?;
            let paths: Vec<(String, PathBuf)> = run.corpora.iter().map(|(k, p)| (k.clone(), settings.resolve(p))).collect();
            let corpora = read_named_corpora(paths.iter().map(|(k, p)| (k.clone(), p.as_path())))?;
            Results::Matrix(bench::run_transfer(registry, detector()?, &corpora, axis, config, &env)?)
        }
        ExperimentKind::FewShot => {
            let source = io::read_corpus(&settings.resolve(need(run.source.as_ref(), "source", &run.protocol)?))?;
            let target = io::read_corpus(&settings.resolve(need(run.target.as_ref(), "target", &run.protocol)?))?;
            let k = *need(run.k.as_ref(), "k", &run.protocol)?;
            Results::Eval(bench::run_few_shot(registry, detector()?, &source, &target, k, config, &env)?)
        }
        ExperimentKind::Cil => {
            let corpus = single_corpus(settings, run)?;
            let techniques = parse_techniques(&run.techniques)?;
            Results::Cil(bench::run_cil(&corpus, &run.new_classes, &techniques, config)?)
        }
    })
}

/// Writes a results directory:
/// - `config.json`: the resolved experiment config and run section;
/// - `results.json` and `results.csv`: the protocol output;
/// - `manifest.json`: CIL runs only.
pub fn write_results_dir(dir: &Path, settings: &Settings, results: &Results) -> Result<()> {
    #[derive(Serialize)]
    struct Resolved<'a> {
        experiment: &'a ExperimentConfig,
        run: Option<&'a RunSpec>,
    }
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    write_json(io::create(&dir.join("config.json"))?, &Resolved { experiment: &settings.experiment, run: settings.run.as_ref() })?;
    results.write(io::create(&dir.join("results.json"))?, Format::Json)?;
    results.write(io::create(&dir.join("results.csv"))?, Format::Csv)?;
    if let Results::Cil(c) = results {
        write_json(io::create(&dir.join("manifest.json"))?, &c.manifest)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn forced_machine_rules_apply_to_any_label() {
        let policy = ModerationPolicy { min_tokens: 3, ..ModerationPolicy::default() };
        let text = "Here is the revised content: one two three four. tail without end";
        let docs = vec![Document::new("a", text, "human")];
        let human = moderate_corpus(&docs, &policy, SplitMode::Human);
        assert_eq!(human.kept[0].text, text);
        let machine = moderate_corpus(&docs, &policy, SplitMode::Machine);
        assert_eq!(machine.kept.len(), 1, "{:?}", machine.rejected);
        assert_eq!(machine.kept[0].text, "one two three four.");
    }

    #[test]
    fn named_paths() {
        assert_eq!(parse_named_path("a=x/y.jsonl"), ("a".into(), PathBuf::from("x/y.jsonl")));
        assert_eq!(parse_named_path("x/news.jsonl"), ("news".into(), PathBuf::from("x/news.jsonl")));
    }

    #[test]
    fn metric_names_are_case_insensitive() {
        assert_eq!(metric_by_name("ll").unwrap(), MetricDetector::LL);
        assert!(metric_by_name("Supervised").is_err());
        assert_eq!(parse_techniques(&[]).unwrap().len(), 5);
        assert!(parse_techniques(&["nope".into()]).is_err());
    }
}
