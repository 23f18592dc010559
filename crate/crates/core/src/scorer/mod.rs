//! Token-scoring contract shared by every proxy language model, and a
//! Laplace-smoothed unigram backend whose numbers can be checked by hand.

mod scores;
mod unigram;

pub use scores::{NextTokenDistribution, TokenScores};
pub use unigram::{fit_reference_unigram, tokenize, UnigramBackend};

use alloc::string::String;
use alloc::vec::Vec;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ScorerError {
    #[error("text has no tokens")]
    EmptyText,
    #[error("token {0:?} is not in the backend vocabulary")]
    OutOfVocabulary(String),
    #[error("cannot fit a backend on an empty corpus")]
    EmptyCorpus,
    #[error("invalid token scores: {0}")]
    InvalidScores(String),
    #[error("invalid next-token distribution: {0}")]
    InvalidDistribution(String),
    #[error("scoring service unreachable: {0}")]
    Transport(String),
    #[error("scoring service broke the wire contract: {0}")]
    Contract(String),
}

impl ScorerError {
    /// Transport failures may succeed on retry; everything else is final.
    pub fn is_retriable(&self) -> bool {
        matches!(self, ScorerError::Transport(_))
    }
}

/// A proxy language model. Implementations must be deterministic.
pub trait ScorerBackend {
    fn name(&self) -> &str;

    /// Per-token log-probabilities, ranks and predictive entropies of `text`.
    /// Position 0 is scored under the empty context.
    fn score_tokens(&self, text: &str) -> Result<TokenScores, ScorerError>;

    /// The full predictive distribution after `context`.
    fn next_token_distribution(&self, context: &[String]) -> Result<NextTokenDistribution, ScorerError>;

    /// Predictive distributions at every position of `tokens`, position `t`
    /// conditioned on `tokens[..t]`.
    fn distributions(&self, tokens: &[String]) -> Result<Vec<NextTokenDistribution>, ScorerError> {
        (0..tokens.len())
            .map(|t| self.next_token_distribution(&tokens[..t]))
            .collect()
    }
}

impl<B: ScorerBackend + ?Sized> ScorerBackend for &B {
    fn name(&self) -> &str {
        (**self).name()
    }

    fn score_tokens(&self, text: &str) -> Result<TokenScores, ScorerError> {
        (**self).score_tokens(text)
    }

    fn next_token_distribution(&self, context: &[String]) -> Result<NextTokenDistribution, ScorerError> {
        (**self).next_token_distribution(context)
    }

    fn distributions(&self, tokens: &[String]) -> Result<Vec<NextTokenDistribution>, ScorerError> {
        (**self).distributions(tokens)
    }
}

impl<B: ScorerBackend + ?Sized> ScorerBackend for alloc::boxed::Box<B> {
    fn name(&self) -> &str {
        (**self).name()
    }

    fn score_tokens(&self, text: &str) -> Result<TokenScores, ScorerError> {
        (**self).score_tokens(text)
    }

    fn next_token_distribution(&self, context: &[String]) -> Result<NextTokenDistribution, ScorerError> {
        (**self).next_token_distribution(context)
    }

    fn distributions(&self, tokens: &[String]) -> Result<Vec<NextTokenDistribution>, ScorerError> {
        (**self).distributions(tokens)
    }
}
