use alloc::collections::BTreeSet;
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::ScorerError;
use crate::math;

const TOL: f64 = 1e-9;

/// Per-position scores of one text under one backend.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TokenScores {
    pub tokens: Vec<String>,
    pub logprobs: Vec<f64>,
    pub ranks: Vec<u32>,
    pub entropies: Vec<f64>,
}

impl TokenScores {
    pub fn new(
        tokens: Vec<String>,
        logprobs: Vec<f64>,
        ranks: Vec<u32>,
        entropies: Vec<f64>,
    ) -> Result<Self, ScorerError> {
        let s = TokenScores { tokens, logprobs, ranks, entropies };
        s.validate()?;
        Ok(s)
    }

    /// Checks lengths and value ranges.
    pub fn validate(&self) -> Result<(), ScorerError> {
        let n = self.tokens.len();
        if self.logprobs.len() != n || self.ranks.len() != n || self.entropies.len() != n {
            return Err(ScorerError::InvalidScores(format!(
                "length mismatch: {} tokens, {} logprobs, {} ranks, {} entropies",
                n,
                self.logprobs.len(),
                self.ranks.len(),
                self.entropies.len()
            )));
        }
        if let Some(i) = self.logprobs.iter().position(|&l| l.is_nan() || l > TOL) {
            return Err(ScorerError::InvalidScores(format!("logprob {} at {i} is positive or NaN", self.logprobs[i])));
        }
        if let Some(i) = self.ranks.iter().position(|&r| r == 0) {
            return Err(ScorerError::InvalidScores(format!("rank 0 at position {i}")));
        }
        if let Some(i) = self.entropies.iter().position(|&h| !(h >= -TOL && h.is_finite())) {
            return Err(ScorerError::InvalidScores(format!("entropy {} at {i}", self.entropies[i])));
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    /// Drops the context-free position 0.
    pub fn skip_first(&self) -> Result<TokenScores, ScorerError> {
        if self.len() < 2 {
            return Err(ScorerError::EmptyText);
        }
        Ok(TokenScores {
            tokens: self.tokens[1..].to_vec(),
            logprobs: self.logprobs[1..].to_vec(),
            ranks: self.ranks[1..].to_vec(),
            entropies: self.entropies[1..].to_vec(),
        })
    }
}

/// A normalized distribution over a backend's vocabulary.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NextTokenDistribution {
    support: Vec<String>,
    probs: Vec<f64>,
}

impl NextTokenDistribution {
    pub fn new(support: Vec<String>, probs: Vec<f64>) -> Result<Self, ScorerError> {
        if support.len() != probs.len() {
            return Err(ScorerError::InvalidDistribution(format!(
                "{} tokens but {} probabilities",
                support.len(),
                probs.len()
            )));
        }
        if support.is_empty() {
            return Err(ScorerError::InvalidDistribution("empty support".into()));
        }
        if let Some(i) = probs.iter().position(|&p| !(p >= 0.0 && p.is_finite())) {
            return Err(ScorerError::InvalidDistribution(format!("probability {} for {:?}", probs[i], support[i])));
        }
        let total: f64 = probs.iter().sum();
        if (total - 1.0).abs() > TOL {
            return Err(ScorerError::InvalidDistribution(format!("probabilities sum to {total}")));
        }
        let mut seen = BTreeSet::new();
        if let Some(dup) = support.iter().find(|t| !seen.insert(t.as_str())) {
            return Err(ScorerError::InvalidDistribution(format!("duplicate token {dup:?}")));
        }
        Ok(NextTokenDistribution { support, probs })
    }

    pub fn support(&self) -> &[String] {
        &self.support
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, f64)> {
        self.support.iter().map(String::as_str).zip(self.probs.iter().copied())
    }

    pub fn prob_of(&self, token: &str) -> Option<f64> {
        self.iter().find(|(t, _)| *t == token).map(|(_, p)| p)
    }

    /// 1-based rank of `token` by descending probability, ties broken by
    /// ascending token string.
    pub fn rank_of(&self, token: &str) -> Option<u32> {
        let p = self.prob_of(token)?;
        let ahead = self.iter().filter(|&(t, q)| q > p || (q == p && t < token)).count();
        Some(ahead as u32 + 1)
    }

    /// Shannon entropy in nats.
    pub fn entropy(&self) -> f64 {
        entropy(&self.probs)
    }
}

pub(crate) fn entropy(probs: &[f64]) -> f64 {
    -probs.iter().filter(|&&p| p > 0.0).map(|&p| p * math::ln(p)).sum::<f64>()
}
