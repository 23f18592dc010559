//! Metric detectors: statistics of token scores that separate human from
//! machine text.

use alloc::collections::BTreeMap;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::math;
use crate::scorer::{NextTokenDistribution, ScorerBackend, ScorerError, TokenScores};

const DEGENERATE: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum DetectorError {
    #[error("no token scores to aggregate")]
    Empty,
    #[error("LRR is undefined when every rank is 1")]
    UndefinedLrr,
    #[error("sampling distribution has zero curvature variance")]
    DegenerateVariance,
    #[error("cross-perplexity is zero")]
    DegenerateCrossPerplexity,
    #[error("token {0:?} has mass under one backend but zero probability under the other")]
    ZeroProbability(String),
    #[error("unknown detector {0:?}")]
    Unknown(String),
    #[error(transparent)]
    Scorer(#[from] ScorerError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    HigherIsMachine,
    LowerIsMachine,
}

impl Direction {
    pub fn as_str(&self) -> &'static str {
        match self {
            Direction::HigherIsMachine => "higher_is_machine",
            Direction::LowerIsMachine => "lower_is_machine",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Arity {
    OneBackend,
    TwoBackend,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum MetricDetector {
    LL,
    Rank,
    LogRank,
    LRR,
    Entropy,
    GLTR,
    FastDetectGPT,
    Binoculars,
}

pub const GLTR_FEATURES: [&str; 4] = ["gltr_top10", "gltr_top100", "gltr_top1000", "gltr_rest"];

impl MetricDetector {
    pub const ALL: [MetricDetector; 8] = [
        MetricDetector::LL,
        MetricDetector::Rank,
        MetricDetector::LogRank,
        MetricDetector::LRR,
        MetricDetector::Entropy,
        MetricDetector::GLTR,
        MetricDetector::FastDetectGPT,
        MetricDetector::Binoculars,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            MetricDetector::LL => "LL",
            MetricDetector::Rank => "Rank",
            MetricDetector::LogRank => "LogRank",
            MetricDetector::LRR => "LRR",
            MetricDetector::Entropy => "Entropy",
            MetricDetector::GLTR => "GLTR",
            MetricDetector::FastDetectGPT => "FastDetectGPT",
            MetricDetector::Binoculars => "Binoculars",
        }
    }

    /// Which side of a threshold indicates machine text. `None` for GLTR,
    /// whose output is a vector.
    pub fn direction(&self) -> Option<Direction> {
        use Direction::*;
        match self {
            MetricDetector::LL | MetricDetector::LRR | MetricDetector::FastDetectGPT => Some(HigherIsMachine),
            MetricDetector::Rank
            | MetricDetector::LogRank
            | MetricDetector::Entropy
            | MetricDetector::Binoculars => Some(LowerIsMachine),
            MetricDetector::GLTR => None,
        }
    }

    pub fn arity(&self) -> Arity {
        match self {
            MetricDetector::FastDetectGPT | MetricDetector::Binoculars => Arity::TwoBackend,
            _ => Arity::OneBackend,
        }
    }

    pub fn feature_names(&self) -> Vec<String> {
        match self {
            MetricDetector::GLTR => GLTR_FEATURES.iter().map(|s| s.to_string()).collect(),
            other => vec![other.name().to_string()],
        }
    }

    /// Scores `text`. Scalar detectors yield a one-element vector.
    pub fn compute(&self, backends: &Backends<'_>, text: &str, opts: MetricOptions) -> Result<FeatureVector, DetectorError> {
        let start = usize::from(opts.skip_first_token);
        let values = match self {
            MetricDetector::FastDetectGPT => vec![fast_detect_gpt_from(backends.primary, backends.sampling(), text, start)?],
            MetricDetector::Binoculars => vec![binoculars_from(backends.observer(), backends.primary, text, start)?],
            single => {
                let mut s = backends.primary.score_tokens(text)?;
                if opts.skip_first_token {
                    s = s.skip_first()?;
                }
                match single {
                    MetricDetector::LL => vec![ll_score(&s)?],
                    MetricDetector::Rank => vec![rank_score(&s)?],
                    MetricDetector::LogRank => vec![log_rank_score(&s)?],
                    MetricDetector::LRR => vec![lrr_score(&s)?],
                    MetricDetector::Entropy => vec![entropy_score(&s)?],
                    _ => return gltr_features(&s),
                }
            }
        };
        Ok(FeatureVector { names: self.feature_names(), values })
    }
}

impl fmt::Display for MetricDetector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for MetricDetector {
    type Err = DetectorError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let key: String = s.chars().filter(|c| c.is_ascii_alphanumeric()).collect::<String>().to_ascii_lowercase();
        let d = match key.as_str() {
            "ll" | "loglikelihood" => MetricDetector::LL,
            "rank" => MetricDetector::Rank,
            "logrank" => MetricDetector::LogRank,
            "lrr" => MetricDetector::LRR,
            "entropy" => MetricDetector::Entropy,
            "gltr" | "rankgltr" => MetricDetector::GLTR,
            "fastdetectgpt" => MetricDetector::FastDetectGPT,
            "binoculars" => MetricDetector::Binoculars,
            _ => return Err(DetectorError::Unknown(s.to_string())),
        };
        Ok(d)
    }
}

/// Backends available to a detector. Two-backend detectors fall back to the
/// primary backend when no secondary is configured.
#[derive(Clone, Copy)]
pub struct Backends<'a> {
    pub primary: &'a dyn ScorerBackend,
    pub secondary: Option<&'a dyn ScorerBackend>,
}

impl<'a> Backends<'a> {
    pub fn single(primary: &'a dyn ScorerBackend) -> Self {
        Backends { primary, secondary: None }
    }

    pub fn pair(primary: &'a dyn ScorerBackend, secondary: &'a dyn ScorerBackend) -> Self {
        Backends { primary, secondary: Some(secondary) }
    }

    /// Fast-DetectGPT sampling model.
    pub fn sampling(&self) -> &'a dyn ScorerBackend {
        self.secondary.unwrap_or(self.primary)
    }

    /// Binoculars observer model.
    pub fn observer(&self) -> &'a dyn ScorerBackend {
        self.secondary.unwrap_or(self.primary)
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct MetricOptions {
    /// Ignore the context-free first position.
    pub skip_first_token: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureVector {
    pub names: Vec<String>,
    pub values: Vec<f64>,
}

impl FeatureVector {
    pub fn scalar(&self) -> Option<f64> {
        (self.values.len() == 1).then(|| self.values[0])
    }
}

fn nonempty(s: &TokenScores) -> Result<(), DetectorError> {
    if s.is_empty() {
        Err(DetectorError::Empty)
    } else {
        Ok(())
    }
}

fn mean(xs: impl Iterator<Item = f64>, n: usize) -> f64 {
    xs.sum::<f64>() / n as f64
}

/// Mean log-probability.
pub fn ll_score(s: &TokenScores) -> Result<f64, DetectorError> {
    nonempty(s)?;
    Ok(mean(s.logprobs.iter().copied(), s.len()))
}

/// Mean rank.
pub fn rank_score(s: &TokenScores) -> Result<f64, DetectorError> {
    nonempty(s)?;
    Ok(mean(s.ranks.iter().map(|&r| r as f64), s.len()))
}

/// Mean natural log of rank.
pub fn log_rank_score(s: &TokenScores) -> Result<f64, DetectorError> {
    nonempty(s)?;
    Ok(mean(s.ranks.iter().map(|&r| math::ln(r as f64)), s.len()))
}

/// Total surprisal over total log-rank.
pub fn lrr_score(s: &TokenScores) -> Result<f64, DetectorError> {
    nonempty(s)?;
    let log_ranks: f64 = s.ranks.iter().map(|&r| math::ln(r as f64)).sum();
    if log_ranks <= 0.0 {
        return Err(DetectorError::UndefinedLrr);
    }
    Ok(-s.logprobs.iter().sum::<f64>() / log_ranks)
}

/// Mean predictive entropy.
pub fn entropy_score(s: &TokenScores) -> Result<f64, DetectorError> {
    nonempty(s)?;
    Ok(mean(s.entropies.iter().copied(), s.len()))
}

/// Fractions of ranks in `[1,10]`, `(10,100]`, `(100,1000]` and above 1000.
pub fn gltr_features(s: &TokenScores) -> Result<FeatureVector, DetectorError> {
    nonempty(s)?;
    let mut counts = [0usize; 4];
    for &r in &s.ranks {
        let bucket = match r {
            0..=10 => 0,
            11..=100 => 1,
            101..=1000 => 2,
            _ => 3,
        };
        counts[bucket] += 1;
    }
    let n = s.len() as f64;
    Ok(FeatureVector {
        names: MetricDetector::GLTR.feature_names(),
        values: counts.iter().map(|&c| c as f64 / n).collect(),
    })
}

/// Pairs each token of `q` with `log p(token)`, failing where `q` puts mass on a
/// token `p` gives zero probability.
fn aligned_logp(p: &NextTokenDistribution, q: &NextTokenDistribution) -> Result<Vec<(f64, f64)>, DetectorError> {
    let logp = |prob: f64, tok: &str| {
        if prob > 0.0 {
            Ok(math::ln(prob))
        } else {
            Err(DetectorError::ZeroProbability(tok.to_string()))
        }
    };
    let mut out = Vec::with_capacity(q.support().len());
    if p.support() == q.support() {
        for ((tok, qv), pv) in q.iter().zip(p.probs()) {
            if qv > 0.0 {
                out.push((qv, logp(*pv, tok)?));
            }
        }
    } else {
        let index: BTreeMap<&str, f64> = p.iter().collect();
        for (tok, qv) in q.iter() {
            if qv > 0.0 {
                out.push((qv, logp(index.get(tok).copied().unwrap_or(0.0), tok)?));
            }
        }
    }
    Ok(out)
}

/// Analytic conditional probability curvature: observed log-likelihood under
/// `scoring` minus its expectation when tokens are drawn from `sampling`,
/// normalized by the standard deviation.
pub fn fast_detect_gpt_score(scoring: &dyn ScorerBackend, sampling: &dyn ScorerBackend, text: &str) -> Result<f64, DetectorError> {
    fast_detect_gpt_from(scoring, sampling, text, 0)
}

fn fast_detect_gpt_from(scoring: &dyn ScorerBackend, sampling: &dyn ScorerBackend, text: &str, start: usize) -> Result<f64, DetectorError> {
    let scores = scoring.score_tokens(text)?;
    if scores.len() <= start {
        return Err(DetectorError::Empty);
    }
    let p = scoring.distributions(&scores.tokens)?;
    let q = sampling.distributions(&scores.tokens)?;
    let (mut observed, mut expected, mut variance) = (0.0, 0.0, 0.0);
    for t in start..scores.len() {
        let pairs = aligned_logp(&p[t], &q[t])?;
        let mu: f64 = pairs.iter().map(|&(w, lp)| w * lp).sum();
        let var: f64 = pairs.iter().map(|&(w, lp)| w * (lp - mu) * (lp - mu)).sum();
        observed += scores.logprobs[t];
        expected += mu;
        variance += var;
    }
    if variance < DEGENERATE {
        return Err(DetectorError::DegenerateVariance);
    }
    Ok((observed - expected) / math::sqrt(variance))
}

/// Log-perplexity under `performer` divided by the observer/performer
/// cross-perplexity. Lower values indicate machine text.
pub fn binoculars_score(observer: &dyn ScorerBackend, performer: &dyn ScorerBackend, text: &str) -> Result<f64, DetectorError> {
    binoculars_from(observer, performer, text, 0)
}

fn binoculars_from(observer: &dyn ScorerBackend, performer: &dyn ScorerBackend, text: &str, start: usize) -> Result<f64, DetectorError> {
    let scores = performer.score_tokens(text)?;
    if scores.len() <= start {
        return Err(DetectorError::Empty);
    }
    let perf = performer.distributions(&scores.tokens)?;
    let obs = observer.distributions(&scores.tokens)?;
    let n = (scores.len() - start) as f64;
    let mut log_ppl = 0.0;
    let mut log_xppl = 0.0;
    for t in start..scores.len() {
        log_ppl -= scores.logprobs[t];
        log_xppl -= aligned_logp(&perf[t], &obs[t])?.iter().map(|&(w, lp)| w * lp).sum::<f64>();
    }
    let (log_ppl, log_xppl) = (log_ppl / n, log_xppl / n);
    if log_xppl < DEGENERATE {
        return Err(DetectorError::DegenerateCrossPerplexity);
    }
    Ok(log_ppl / log_xppl)
}
