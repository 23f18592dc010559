use alloc::boxed::Box;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use super::{BenchError, DecisionMode, ExperimentConfig};
use crate::corpus::Document;
use crate::decision::{self, LinearModel, ThresholdRule};
use crate::detectors::{Backends, MetricDetector, MetricOptions};
use crate::metrics::Task;
use crate::neural::{self, LabeledText, NeuralClassifier};

/// Scoring resources available to detectors.
#[derive(Clone, Copy, Default)]
pub struct Env<'a> {
    pub backends: Option<Backends<'a>>,
}

impl<'a> Env<'a> {
    pub fn new(backends: Backends<'a>) -> Self {
        Env { backends: Some(backends) }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DetectorKind {
    Metric,
    Supervised,
}

/// A trainable detector. `fit` sees training documents; `predict` returns one
/// class name per document, in the task's label space.
pub trait Detector {
    fn name(&self) -> &str;
    fn kind(&self) -> DetectorKind;
    fn fit(&mut self, train: &[Document], env: &Env<'_>) -> Result<(), BenchError>;
    fn predict(&self, docs: &[Document], env: &Env<'_>) -> Result<Vec<String>, BenchError>;
}

enum Fitted {
    Threshold(ThresholdRule),
    Linear(LinearModel),
}

pub struct MetricDetectorImpl {
    metric: MetricDetector,
    name: String,
    task: Task,
    mode: DecisionMode,
    auto_orient: bool,
    options: MetricOptions,
    logistic: decision::LogisticConfig,
    svm: decision::SvmConfig,
    fitted: Option<Fitted>,
}

impl MetricDetectorImpl {
    pub fn new(metric: MetricDetector, config: &ExperimentConfig) -> Result<Self, BenchError> {
        if config.decision == DecisionMode::Threshold {
            if metric.direction().is_none() {
                return Err(BenchError::ThresholdNeedsScalar(metric.name().into()));
            }
            if config.task != Task::Binary {
                return Err(BenchError::ThresholdNeedsBinary);
            }
        }
        Ok(MetricDetectorImpl {
            metric,
            name: metric.name().to_string(),
            task: config.task,
            mode: config.decision,
            auto_orient: config.auto_orient,
            options: MetricOptions { skip_first_token: config.skip_first_token },
            logistic: decision::LogisticConfig { seed: config.seed, ..config.logistic },
            svm: decision::SvmConfig { seed: config.seed, ..config.svm },
            fitted: None,
        })
    }

    pub fn boxed(metric: MetricDetector, config: &ExperimentConfig) -> Result<Box<dyn Detector>, BenchError> {
        Ok(Box::new(Self::new(metric, config)?))
    }

    pub fn threshold_rule(&self) -> Option<&ThresholdRule> {
        match &self.fitted {
            Some(Fitted::Threshold(r)) => Some(r),
            _ => None,
        }
    }

    pub fn linear_model(&self) -> Option<&LinearModel> {
        match &self.fitted {
            Some(Fitted::Linear(m)) => Some(m),
            _ => None,
        }
    }

    fn features(&self, docs: &[Document], env: &Env<'_>) -> Result<Vec<Vec<f64>>, BenchError> {
        let backends = env.backends.ok_or_else(|| BenchError::MissingBackend(self.name.clone()))?;
        docs.iter()
            .map(|d| Ok(self.metric.compute(&backends, &d.text, self.options)?.values))
            .collect()
    }
}

impl Detector for MetricDetectorImpl {
    fn name(&self) -> &str {
        &self.name
    }

    fn kind(&self) -> DetectorKind {
        DetectorKind::Metric
    }

    fn fit(&mut self, train: &[Document], env: &Env<'_>) -> Result<(), BenchError> {
        let x = self.features(train, env)?;
        let fitted = match self.mode {
            DecisionMode::Threshold => {
                let scores: Vec<f64> = x.iter().map(|v| v[0]).collect();
                let machine: Vec<bool> = train.iter().map(|d| !d.label.is_human()).collect();
                let direction = if self.auto_orient { None } else { self.metric.direction() };
                Fitted::Threshold(decision::calibrate_threshold(&self.name, &scores, &machine, direction)?)
            }
            mode => {
                let labels: Vec<String> = train.iter().map(|d| self.task.target(&d.label)).collect();
                let names = self.metric.feature_names();
                Fitted::Linear(match mode {
                    DecisionMode::Logistic => decision::train_logistic(&x, &labels, &names, &self.logistic)?,
                    _ => decision::train_linear_svm(&x, &labels, &names, &self.svm)?,
                })
            }
        };
        self.fitted = Some(fitted);
        Ok(())
    }

    fn predict(&self, docs: &[Document], env: &Env<'_>) -> Result<Vec<String>, BenchError> {
        let fitted = self.fitted.as_ref().ok_or_else(|| BenchError::NotFitted(self.name.clone()))?;
        let x = self.features(docs, env)?;
        x.iter()
            .map(|v| match fitted {
                Fitted::Threshold(rule) => Ok(if rule.apply(v[0]) { "machine" } else { "human" }.to_string()),
                Fitted::Linear(m) => Ok(m.predict(v)?.label),
            })
            .collect()
    }
}

/// The supervised reference classifier behind the detector interface.
pub struct SupervisedDetector {
    task: Task,
    config: neural::TrainConfig,
    spec: neural::EncoderSpec,
    model: Option<NeuralClassifier>,
}

impl SupervisedDetector {
    pub fn new(config: &ExperimentConfig) -> Self {
        SupervisedDetector {
            task: config.task,
            config: neural::TrainConfig { seed: config.seed, ..config.neural.clone() },
            spec: config.encoder,
            model: None,
        }
    }

    pub fn model(&self) -> Option<&NeuralClassifier> {
        self.model.as_ref()
    }
}

impl Detector for SupervisedDetector {
    fn name(&self) -> &str {
        "Supervised"
    }

    fn kind(&self) -> DetectorKind {
        DetectorKind::Supervised
    }

    fn fit(&mut self, train: &[Document], _env: &Env<'_>) -> Result<(), BenchError> {
        let data: Vec<LabeledText> = train.iter().map(|d| LabeledText::new(d.text.clone(), self.task.target(&d.label))).collect();
        self.model = Some(neural::train_supervised(&data, &self.config, self.spec)?);
        Ok(())
    }

    fn predict(&self, docs: &[Document], _env: &Env<'_>) -> Result<Vec<String>, BenchError> {
        let m = self.model.as_ref().ok_or_else(|| BenchError::NotFitted("Supervised".into()))?;
        Ok(docs.iter().map(|d| m.predict(&d.text).to_string()).collect())
    }
}
