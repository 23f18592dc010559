use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::scores::entropy;
use super::{NextTokenDistribution, ScorerBackend, ScorerError, TokenScores};
use crate::math;

/// Lowercased whitespace-delimited words.
pub fn tokenize(text: &str) -> Vec<String> {
    text.split_whitespace().map(|w| w.to_lowercase()).collect()
}

/// Context-free backend with `p(w) = (count(w) + 1) / (N + V)` over the
/// observed vocabulary.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "UnigramCounts", into = "UnigramCounts")]
pub struct UnigramBackend {
    name: String,
    counts: BTreeMap<String, u64>,
    /// Vocabulary in rank order.
    by_rank: Vec<String>,
    probs: Vec<f64>,
    index: BTreeMap<String, usize>,
    entropy: f64,
}

#[derive(Serialize, Deserialize)]
struct UnigramCounts {
    name: String,
    counts: BTreeMap<String, u64>,
}

impl TryFrom<UnigramCounts> for UnigramBackend {
    type Error = ScorerError;

    fn try_from(c: UnigramCounts) -> Result<Self, Self::Error> {
        UnigramBackend::from_counts(c.name, c.counts)
    }
}

impl From<UnigramBackend> for UnigramCounts {
    fn from(b: UnigramBackend) -> Self {
        UnigramCounts { name: b.name, counts: b.counts }
    }
}

/// Fits the reference backend on a token stream (tokens are lowercased).
pub fn fit_reference_unigram<I, S>(tokens: I) -> Result<UnigramBackend, ScorerError>
where
    I: IntoIterator<Item = S>,
    S: AsRef<str>,
{
    let mut counts: BTreeMap<String, u64> = BTreeMap::new();
    for t in tokens {
        *counts.entry(t.as_ref().to_lowercase()).or_insert(0) += 1;
    }
    UnigramBackend::from_counts("unigram".into(), counts)
}

impl UnigramBackend {
    pub fn from_text(text: &str) -> Result<Self, ScorerError> {
        fit_reference_unigram(text.split_whitespace())
    }

    pub fn from_counts(name: String, counts: BTreeMap<String, u64>) -> Result<Self, ScorerError> {
        let total: u64 = counts.values().sum();
        if counts.is_empty() || total == 0 {
            return Err(ScorerError::EmptyCorpus);
        }
        let denom = (total + counts.len() as u64) as f64;
        let mut ranked: Vec<(&String, u64)> = counts.iter().map(|(w, &c)| (w, c)).collect();
        // Probability is monotone in count, so sorting by count is sorting by probability.
        ranked.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(b.0)));
        let by_rank: Vec<String> = ranked.iter().map(|(w, _)| (*w).clone()).collect();
        let probs: Vec<f64> = ranked.iter().map(|&(_, c)| (c + 1) as f64 / denom).collect();
        let index = by_rank.iter().enumerate().map(|(i, w)| (w.clone(), i)).collect();
        let entropy = entropy(&probs);
        Ok(UnigramBackend { name, counts, by_rank, probs, index, entropy })
    }

    pub fn with_name(mut self, name: impl Into<String>) -> Self {
        self.name = name.into();
        self
    }

    pub fn vocabulary_size(&self) -> usize {
        self.by_rank.len()
    }

    pub fn prob(&self, token: &str) -> Option<f64> {
        self.index.get(token).map(|&i| self.probs[i])
    }

    fn lookup(&self, token: &str) -> Result<usize, ScorerError> {
        self.index
            .get(token)
            .copied()
            .ok_or_else(|| ScorerError::OutOfVocabulary(token.into()))
    }
}

impl ScorerBackend for UnigramBackend {
    fn name(&self) -> &str {
        &self.name
    }

    fn score_tokens(&self, text: &str) -> Result<TokenScores, ScorerError> {
        let tokens = tokenize(text);
        if tokens.is_empty() {
            return Err(ScorerError::EmptyText);
        }
        let mut logprobs = Vec::with_capacity(tokens.len());
        let mut ranks = Vec::with_capacity(tokens.len());
        for t in &tokens {
            let i = self.lookup(t)?;
            logprobs.push(math::ln(self.probs[i]));
            ranks.push(i as u32 + 1);
        }
        let entropies = alloc::vec![self.entropy; tokens.len()];
        TokenScores::new(tokens, logprobs, ranks, entropies)
    }

    fn next_token_distribution(&self, context: &[String]) -> Result<NextTokenDistribution, ScorerError> {
        for t in context {
            self.lookup(t)?;
        }
        NextTokenDistribution::new(self.by_rank.clone(), self.probs.clone())
    }
}
