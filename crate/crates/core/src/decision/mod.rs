//! Decision rules over detector outputs: F1-optimal thresholds for scalar
//! scores and linear classifiers for feature vectors.

mod lbfgs;
mod linear;
mod threshold;

pub use crate::detectors::Direction;
pub use lbfgs::{minimize, LbfgsOptions, LbfgsResult};
pub use linear::{
    train_linear_svm, train_logistic, LinearKind, LinearModel, LogisticConfig, Prediction, SvmConfig,
    TrainMetadata, MODEL_VERSION,
};
pub use threshold::{binary_f1, calibrate_threshold, ThresholdRule};

use alloc::string::String;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum DecisionError {
    #[error("{scores} scores but {labels} labels")]
    LengthMismatch { scores: usize, labels: usize },
    #[error("calibration needs both human and machine examples")]
    SingleClass,
    #[error("training needs at least two classes, found {0}")]
    TooFewClasses(usize),
    #[error("no training rows")]
    Empty,
    #[error("non-finite value in row {row}")]
    NonFinite { row: usize },
    #[error("row {row} has {found} features, expected {expected}")]
    FeatureLength { row: usize, expected: usize, found: usize },
    #[error("invalid configuration: {0}")]
    Config(String),
}
