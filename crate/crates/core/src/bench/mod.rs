//! Experiment protocols, detector and experiment registries, and result types.

mod cil;
mod config;
mod detector;
mod protocols;
mod registry;

pub use cil::{run_cil, CilRun, ManifestEntry, StageReport};
pub use config::{Caps, DecisionMode, ExperimentConfig};
pub use detector::{Detector, DetectorKind, Env, MetricDetectorImpl, SupervisedDetector};
pub use protocols::{
    prepare_split, run_few_shot, run_in_distribution, run_transfer, Axis, LongRow, PreparedSplit, TransferMatrix,
    MATRIX_METRICS,
};
pub use registry::{DetectorFactory, ExperimentKind, Registry};

use alloc::string::String;

use crate::continual::ContinualError;
use crate::corpus::CorpusError;
use crate::decision::DecisionError;
use crate::detectors::DetectorError;
use crate::metrics::MetricsError;
use crate::neural::NeuralError;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum BenchError {
    #[error("unknown detector {0:?}")]
    UnknownDetector(String),
    #[error("unknown experiment {0:?}")]
    UnknownExperiment(String),
    #[error("name {0:?} is already registered")]
    DuplicateName(String),
    #[error("need ≥ 2 corpora, got {0}")]
    NeedTwoCorpora(usize),
    #[error("detector {0} needs a scorer backend")]
    MissingBackend(String),
    #[error("threshold decisions need a scalar detector; {0} produces a vector")]
    ThresholdNeedsScalar(String),
    #[error("threshold decisions only apply to the binary task")]
    ThresholdNeedsBinary,
    #[error("detector {0} used before fit")]
    NotFitted(String),
    #[error("few-shot k = {k} exceeds the {available} target training documents of class {class:?}")]
    FewShotTooLarge { class: String, k: usize, available: usize },
    #[error("invalid CIL setup: {0}")]
    Cil(String),
    #[error(transparent)]
    Corpus(#[from] CorpusError),
    #[error(transparent)]
    Detector(#[from] DetectorError),
    #[error(transparent)]
    Decision(#[from] DecisionError),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
    #[error(transparent)]
    Neural(#[from] NeuralError),
    #[error(transparent)]
    Continual(#[from] ContinualError),
}
