use alloc::boxed::Box;
use alloc::collections::BTreeMap;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use super::{BenchError, Detector, ExperimentConfig, MetricDetectorImpl, SupervisedDetector};
use crate::detectors::MetricDetector;

pub type DetectorFactory = fn(&ExperimentConfig) -> Result<Box<dyn Detector>, BenchError>;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExperimentKind {
    InDistribution,
    Transfer,
    FewShot,
    Cil,
}

/// Name-keyed constructors. Lookups ignore ASCII case; unknown names are errors.
#[derive(Clone)]
pub struct Registry {
    detectors: BTreeMap<String, DetectorFactory>,
    experiments: BTreeMap<String, ExperimentKind>,
}

fn key(name: &str) -> String {
    name.to_ascii_lowercase()
}

macro_rules! metric_factory {
    ($variant:ident) => {
        (|cfg: &ExperimentConfig| MetricDetectorImpl::boxed(MetricDetector::$variant, cfg)) as DetectorFactory
    };
}

impl Registry {
    pub fn empty() -> Self {
        Registry { detectors: BTreeMap::new(), experiments: BTreeMap::new() }
    }

    /// All metric detectors, the supervised classifier and the four protocols.
    pub fn standard() -> Self {
        let mut r = Registry::empty();
        let metrics: [(MetricDetector, DetectorFactory); 8] = [
            (MetricDetector::LL, metric_factory!(LL)),
            (MetricDetector::Rank, metric_factory!(Rank)),
            (MetricDetector::LogRank, metric_factory!(LogRank)),
            (MetricDetector::LRR, metric_factory!(LRR)),
            (MetricDetector::Entropy, metric_factory!(Entropy)),
            (MetricDetector::GLTR, metric_factory!(GLTR)),
            (MetricDetector::FastDetectGPT, metric_factory!(FastDetectGPT)),
            (MetricDetector::Binoculars, metric_factory!(Binoculars)),
        ];
        for (m, f) in metrics {
            r.register_detector(m.name(), f).expect("distinct names");
        }
        r.register_detector("Supervised", |cfg| Ok(Box::new(SupervisedDetector::new(cfg)))).expect("distinct names");
        for (name, kind) in [
            ("in_distribution", ExperimentKind::InDistribution),
            ("transfer", ExperimentKind::Transfer),
            ("few_shot", ExperimentKind::FewShot),
            ("cil", ExperimentKind::Cil),
        ] {
            r.register_experiment(name, kind).expect("distinct names");
        }
        r
    }

    pub fn register_detector(&mut self, name: &str, factory: DetectorFactory) -> Result<(), BenchError> {
        if self.detectors.insert(key(name), factory).is_some() {
            return Err(BenchError::DuplicateName(name.to_string()));
        }
        Ok(())
    }

    pub fn register_experiment(&mut self, name: &str, kind: ExperimentKind) -> Result<(), BenchError> {
        if self.experiments.insert(key(name), kind).is_some() {
            return Err(BenchError::DuplicateName(name.to_string()));
        }
        Ok(())
    }

    pub fn detector(&self, name: &str, config: &ExperimentConfig) -> Result<Box<dyn Detector>, BenchError> {
        let factory = self.detectors.get(&key(name)).ok_or_else(|| BenchError::UnknownDetector(name.to_string()))?;
        factory(config)
    }

    pub fn experiment(&self, name: &str) -> Result<ExperimentKind, BenchError> {
        self.experiments.get(&key(name)).copied().ok_or_else(|| BenchError::UnknownExperiment(name.to_string()))
    }

    pub fn detector_names(&self) -> Vec<&str> {
        self.detectors.keys().map(String::as_str).collect()
    }

    pub fn experiment_names(&self) -> Vec<&str> {
        self.experiments.keys().map(String::as_str).collect()
    }
}

impl Default for Registry {
    fn default() -> Self {
        Registry::standard()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lookups() {
        let r = Registry::standard();
        let cfg = ExperimentConfig::default();
        assert_eq!(r.detector("ll", &cfg).unwrap().name(), "LL");
        assert!(matches!(r.detector("unknown", &cfg), Err(BenchError::UnknownDetector(_))));
        assert_eq!(r.experiment("CIL").unwrap(), ExperimentKind::Cil);
        assert!(r.experiment("ablation").is_err());
        assert_eq!(r.detector_names().len(), 9);
    }

    #[test]
    fn duplicates_are_rejected() {
        let mut r = Registry::standard();
        assert!(matches!(r.register_detector("LL", metric_factory!(LL)), Err(BenchError::DuplicateName(_))));
    }

    #[test]
    fn gltr_cannot_threshold() {
        let r = Registry::standard();
        assert!(matches!(r.detector("GLTR", &ExperimentConfig::default()), Err(BenchError::ThresholdNeedsScalar(_))));
        let cfg = ExperimentConfig { decision: crate::bench::DecisionMode::Logistic, ..ExperimentConfig::default() };
        assert!(r.detector("GLTR", &cfg).is_ok());
    }
}
