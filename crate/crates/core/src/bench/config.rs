use alloc::format;
use alloc::string::String;

use serde::{Deserialize, Serialize};

use crate::continual::CilConfig;
use crate::decision::{LogisticConfig, SvmConfig};
use crate::metrics::Task;
use crate::neural::{EncoderSpec, TrainConfig};
use crate::seed;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DecisionMode {
    Threshold,
    Logistic,
    Svm,
}

/// Sample caps applied after splitting.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct Caps {
    /// Calibration set size for metric detectors.
    pub zero_shot_train: usize,
    /// Training set size for supervised detectors.
    pub supervised_train: usize,
    pub test: usize,
}

impl Default for Caps {
    fn default() -> Self {
        Caps { zero_shot_train: 1000, supervised_train: 10_000, test: 2000 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExperimentConfig {
    pub seed: u64,
    pub split_ratio: f64,
    pub task: Task,
    pub decision: DecisionMode,
    /// Search both threshold orientations instead of the detector's registered one.
    pub auto_orient: bool,
    pub skip_first_token: bool,
    pub caps: Caps,
    pub logistic: LogisticConfig,
    pub svm: SvmConfig,
    pub neural: TrainConfig,
    pub encoder: EncoderSpec,
    pub cil: CilConfig,
    /// Epochs for the CIL base model and the joint upper bound.
    pub cil_base_epochs: usize,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            seed: 3407,
            split_ratio: 0.8,
            task: Task::Binary,
            decision: DecisionMode::Threshold,
            auto_orient: false,
            skip_first_token: false,
            caps: Caps::default(),
            logistic: LogisticConfig::default(),
            svm: SvmConfig::default(),
            neural: TrainConfig::default(),
            encoder: EncoderSpec::default(),
            cil: CilConfig::default(),
            cil_base_epochs: 2,
        }
    }
}

impl ExperimentConfig {
    /// Learning rates scaled for the bag-of-words reference model, which
    /// barely moves at transformer fine-tuning rates.
    pub fn desk() -> Self {
        let mut c = ExperimentConfig::default();
        c.neural.learning_rate = 0.5;
        c.neural.batch_size = 16;
        c.cil.base_learning_rate = 0.5;
        c.cil.update_learning_rate = Some(0.5);
        c.cil.batch_size = 16;
        c
    }

    /// Stable fingerprint of the configuration and detector name.
    pub fn config_hash(&self, detector: &str) -> String {
        format!("{:016x}", seed::fnv1a(format!("{self:?}|{detector}").as_bytes()))
    }
}
