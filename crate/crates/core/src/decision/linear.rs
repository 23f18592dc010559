use alloc::collections::BTreeSet;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::lbfgs::{minimize, LbfgsOptions};
use super::DecisionError;
use crate::math::{self, dot};
use crate::seed;

pub const MODEL_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LinearKind {
    Logistic,
    LinearSvm,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainMetadata {
    pub iterations: usize,
    pub converged: bool,
    pub objective: f64,
    #[serde(default)]
    pub warnings: Vec<String>,
}

/// An affine classifier. One weight row per class, binary problems included.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearModel {
    pub version: u32,
    pub kind: LinearKind,
    pub classes: Vec<String>,
    pub weights: Vec<Vec<f64>>,
    pub bias: Vec<f64>,
    pub feature_names: Vec<String>,
    pub metadata: TrainMetadata,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub label: String,
    pub index: usize,
    pub scores: Vec<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub probabilities: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LogisticConfig {
    pub l2: f64,
    pub max_iter: usize,
    pub tol: f64,
    pub seed: u64,
}

impl Default for LogisticConfig {
    fn default() -> Self {
        LogisticConfig { l2: 1.0, max_iter: 1000, tol: 1e-8, seed: 0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SvmConfig {
    pub c: f64,
    pub max_iter: usize,
    pub tol: f64,
    pub seed: u64,
}

impl Default for SvmConfig {
    fn default() -> Self {
        SvmConfig { c: 1.0, max_iter: 1000, tol: 1e-4, seed: 0 }
    }
}

impl LinearModel {
    pub fn num_features(&self) -> usize {
        self.feature_names.len()
    }

    pub fn decision_scores(&self, x: &[f64]) -> Result<Vec<f64>, DecisionError> {
        if x.len() != self.num_features() {
            return Err(DecisionError::FeatureLength { row: 0, expected: self.num_features(), found: x.len() });
        }
        Ok(self.weights.iter().zip(&self.bias).map(|(w, b)| dot(w, x) + b).collect())
    }

    /// Highest-scoring class, first in class order on ties. Logistic models
    /// also report softmax probabilities.
    pub fn predict(&self, x: &[f64]) -> Result<Prediction, DecisionError> {
        let scores = self.decision_scores(x)?;
        let index = math::argmax(&scores).unwrap_or(0);
        let probabilities = (self.kind == LinearKind::Logistic).then(|| math::softmax(&scores));
        Ok(Prediction { label: self.classes[index].clone(), index, scores, probabilities })
    }
}

struct Prepared {
    classes: Vec<String>,
    targets: Vec<usize>,
    dim: usize,
}

fn prepare<S: AsRef<str>>(features: &[Vec<f64>], labels: &[S], feature_names: &[String]) -> Result<Prepared, DecisionError> {
    if features.len() != labels.len() {
        return Err(DecisionError::LengthMismatch { scores: features.len(), labels: labels.len() });
    }
    if features.is_empty() {
        return Err(DecisionError::Empty);
    }
    let dim = feature_names.len();
    for (row, x) in features.iter().enumerate() {
        if x.len() != dim {
            return Err(DecisionError::FeatureLength { row, expected: dim, found: x.len() });
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(DecisionError::NonFinite { row });
        }
    }
    let classes: Vec<String> = labels
        .iter()
        .map(|l| l.as_ref())
        .collect::<BTreeSet<_>>()
        .into_iter()
        .map(ToString::to_string)
        .collect();
    if classes.len() < 2 {
        return Err(DecisionError::TooFewClasses(classes.len()));
    }
    let targets = labels
        .iter()
        .map(|l| classes.iter().position(|c| c == l.as_ref()).expect("label collected above"))
        .collect();
    Ok(Prepared { classes, targets, dim })
}

/// Multinomial logistic regression minimizing mean cross-entropy plus
/// `l2 / (2n) * ||W||^2` (bias unpenalized) with L-BFGS.
pub fn train_logistic<S: AsRef<str>>(
    features: &[Vec<f64>],
    labels: &[S],
    feature_names: &[String],
    config: &LogisticConfig,
) -> Result<LinearModel, DecisionError> {
    if !(config.l2 >= 0.0 && config.tol > 0.0) {
        return Err(DecisionError::Config(format!("l2 {} / tol {}", config.l2, config.tol)));
    }
    let p = prepare(features, labels, feature_names)?;
    let (k, d, n) = (p.classes.len(), p.dim, features.len());
    let inv_n = 1.0 / n as f64;
    let objective = |theta: &[f64], grad: &mut [f64]| -> f64 {
        grad.iter_mut().for_each(|g| *g = 0.0);
        let (w, b) = theta.split_at(k * d);
        let mut loss = 0.0;
        let mut z = vec![0.0; k];
        for (x, &y) in features.iter().zip(&p.targets) {
            for c in 0..k {
                z[c] = dot(&w[c * d..(c + 1) * d], x) + b[c];
            }
            let lse = math::log_sum_exp(&z);
            loss += lse - z[y];
            for c in 0..k {
                let r = (math::exp(z[c] - lse) - f64::from(u8::from(c == y))) * inv_n;
                for (gj, xj) in grad[c * d..(c + 1) * d].iter_mut().zip(x) {
                    *gj += r * xj;
                }
                grad[k * d + c] += r;
            }
        }
        let reg = config.l2 * inv_n;
        for (gj, wj) in grad[..k * d].iter_mut().zip(w) {
            *gj += reg * wj;
        }
        loss * inv_n + 0.5 * reg * dot(w, w)
    };
    let result = minimize(
        objective,
        vec![0.0; k * d + k],
        LbfgsOptions { memory: 10, max_iter: config.max_iter, tol: config.tol },
    );
    let (w, b) = result.x.split_at(k * d);
    let mut warnings = Vec::new();
    if !result.converged {
        warnings.push(format!("L-BFGS stopped after {} iterations without reaching tol {}", result.iterations, config.tol));
    }
    Ok(LinearModel {
        version: MODEL_VERSION,
        kind: LinearKind::Logistic,
        classes: p.classes,
        weights: (0..k).map(|c| w[c * d..(c + 1) * d].to_vec()).collect(),
        bias: b.to_vec(),
        feature_names: feature_names.to_vec(),
        metadata: TrainMetadata { iterations: result.iterations, converged: result.converged, objective: result.value, warnings },
    })
}

/// One-vs-rest hinge-loss linear SVM, `0.5 * ||w||^2 + c * sum(hinge)` per
/// class, solved by dual coordinate descent. The bias is an extra constant
/// feature and is regularized with the weights.
pub fn train_linear_svm<S: AsRef<str>>(
    features: &[Vec<f64>],
    labels: &[S],
    feature_names: &[String],
    config: &SvmConfig,
) -> Result<LinearModel, DecisionError> {
    if !(config.c > 0.0 && config.tol > 0.0) {
        return Err(DecisionError::Config(format!("c {} / tol {}", config.c, config.tol)));
    }
    let p = prepare(features, labels, feature_names)?;
    let (k, d, n) = (p.classes.len(), p.dim, features.len());
    let q_diag: Vec<f64> = features.iter().map(|x| dot(x, x) + 1.0).collect();

    let mut weights = Vec::with_capacity(k);
    let mut bias = Vec::with_capacity(k);
    let mut iterations = 0;
    let mut converged = true;
    let mut objective = 0.0;
    let mut warnings = Vec::new();
    for class in 0..k {
        let y: Vec<f64> = p.targets.iter().map(|&t| if t == class { 1.0 } else { -1.0 }).collect();
        let mut alpha = vec![0.0; n];
        let mut w = vec![0.0; d];
        let mut w0 = 0.0;
        let mut rng = seed::rng(seed::derive_seed(config.seed, "svm") ^ class as u64);
        let mut order: Vec<usize> = (0..n).collect();
        let mut done = false;
        let mut sweeps = 0;
        while sweeps < config.max_iter {
            sweeps += 1;
            order.shuffle(&mut rng);
            let (mut pg_max, mut pg_min) = (f64::NEG_INFINITY, f64::INFINITY);
            for &i in &order {
                let x = &features[i];
                let g = y[i] * (dot(&w, x) + w0) - 1.0;
                let pg = if alpha[i] == 0.0 {
                    g.min(0.0)
                } else if alpha[i] == config.c {
                    g.max(0.0)
                } else {
                    g
                };
                pg_max = pg_max.max(pg);
                pg_min = pg_min.min(pg);
                if pg.abs() > 1e-12 {
                    let old = alpha[i];
                    alpha[i] = (old - g / q_diag[i]).clamp(0.0, config.c);
                    let delta = (alpha[i] - old) * y[i];
                    for (wj, xj) in w.iter_mut().zip(x) {
                        *wj += delta * xj;
                    }
                    w0 += delta;
                }
            }
            if pg_max - pg_min < config.tol {
                done = true;
                break;
            }
        }
        if !done {
            converged = false;
            warnings.push(format!("class {:?}: no convergence within {} sweeps", p.classes[class], config.max_iter));
        }
        iterations = iterations.max(sweeps);
        let hinge: f64 = features
            .iter()
            .zip(&y)
            .map(|(x, yi)| (1.0 - yi * (dot(&w, x) + w0)).max(0.0))
            .sum();
        objective += 0.5 * (dot(&w, &w) + w0 * w0) + config.c * hinge;
        weights.push(w);
        bias.push(w0);
    }
    Ok(LinearModel {
        version: MODEL_VERSION,
        kind: LinearKind::LinearSvm,
        classes: p.classes,
        weights,
        bias,
        feature_names: feature_names.to_vec(),
        metadata: TrainMetadata { iterations, converged, objective, warnings },
    })
}
