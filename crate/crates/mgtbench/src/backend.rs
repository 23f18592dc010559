//! Backend specifications, the scoring-service adapter and its HTTP transport.

use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Duration;

use mgtbench_core::scorer::{NextTokenDistribution, ScorerBackend, ScorerError, TokenScores, UnigramBackend};
use serde::Deserialize;
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use crate::cache::{CachedBackend, ScoreCache};
use crate::{io, Error, Result};

pub type DynBackend = Box<dyn ScorerBackend + Send + Sync>;

/// Where token scores come from.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum BackendSpec {
    /// `unigram:<path>`: a reference text file, or a `.json` counts file.
    Unigram(PathBuf),
    /// `http://host:port[/prefix]`: a scoring service.
    Http(String),
}

impl BackendSpec {
    pub fn parse(spec: &str) -> Result<Self> {
        let bad = |reason: &str| Error::BackendSpec { spec: spec.to_string(), reason: reason.to_string() };
        if let Some(path) = spec.strip_prefix("unigram:") {
            if path.is_empty() {
                return Err(bad("missing reference file path"));
            }
            return Ok(BackendSpec::Unigram(PathBuf::from(path)));
        }
        if spec.starts_with("http://") {
            return Ok(BackendSpec::Http(spec.trim_end_matches('/').to_string()));
        }
        if spec.starts_with("https://") {
            return Err(bad("TLS is not supported; use an http:// endpoint"));
        }
        Err(bad("expected unigram:<path> or http://<host>"))
    }
}

/// Loads a unigram backend. Text files are fitted; `.json` files hold saved
/// counts. The backend name carries a content digest so cache entries from
/// different reference corpora never collide.
pub fn load_unigram(path: &Path) -> Result<UnigramBackend> {
    let content = io::read_to_string(path)?;
    let backend = if path.extension().is_some_and(|e| e == "json") {
        serde_json::from_str::<UnigramBackend>(&content).map_err(|e| Error::Parse { path: path.into(), message: e.to_string() })?
    } else {
        UnigramBackend::from_text(&content)?
    };
    let digest = hex::encode(Sha256::digest(content.as_bytes()));
    Ok(backend.with_name(format!("unigram-{}", &digest[..12])))
}

/// Request/response channel to a scoring service.
pub trait Transport: Send + Sync {
    /// Sends a JSON body to `route` (`"score"` or `"distribution"`).
    /// Connection problems map to [`ScorerError::Transport`].
    fn post(&self, route: &str, body: &Value) -> Result<Value, ScorerError>;
}

impl<T: Transport + ?Sized> Transport for Arc<T> {
    fn post(&self, route: &str, body: &Value) -> Result<Value, ScorerError> {
        (**self).post(route, body)
    }
}

/// Blocking HTTP transport: `POST <base>/<route>` with a JSON body.
pub struct HttpTransport {
    base: String,
    agent: ureq::Agent,
}

impl HttpTransport {
    pub fn new(base: impl Into<String>, timeout: Duration) -> Self {
        HttpTransport { base: base.into(), agent: ureq::AgentBuilder::new().timeout(timeout).build() }
    }
}

impl Transport for HttpTransport {
    fn post(&self, route: &str, body: &Value) -> Result<Value, ScorerError> {
        let url = format!("{}/{route}", self.base);
        match self.agent.post(&url).send_json(body) {
            Ok(resp) => resp.into_json::<Value>().map_err(|e| ScorerError::Contract(format!("{url}: {e}"))),
            Err(ureq::Error::Status(code, _)) if code >= 500 => Err(ScorerError::Transport(format!("{url}: HTTP {code}"))),
            Err(ureq::Error::Status(code, _)) => Err(ScorerError::Contract(format!("{url}: HTTP {code}"))),
            Err(e) => Err(ScorerError::Transport(format!("{url}: {e}"))),
        }
    }
}

#[derive(Deserialize)]
struct ScoreResponse {
    tokens: Vec<String>,
    logprobs: Vec<f64>,
    ranks: Vec<u32>,
    entropies: Vec<f64>,
}

#[derive(Deserialize)]
struct DistributionResponse {
    support: Vec<String>,
    probs: Vec<f64>,
}

/// A backend whose answers come from a scoring service. Retriable transport
/// failures are retried up to `retries` extra times; malformed or
/// inconsistent responses fail immediately with a contract error.
pub struct ExternalBackend<T> {
    name: String,
    transport: T,
    retries: usize,
}

impl<T: Transport> ExternalBackend<T> {
    pub fn new(name: impl Into<String>, transport: T) -> Self {
        ExternalBackend { name: name.into(), transport, retries: 2 }
    }

    pub fn with_retries(mut self, retries: usize) -> Self {
        self.retries = retries;
        self
    }

    fn call(&self, route: &str, body: &Value) -> Result<Value, ScorerError> {
        let mut attempt = 0;
        loop {
            match self.transport.post(route, body) {
                Err(e) if e.is_retriable() && attempt < self.retries => attempt += 1,
                other => return other,
            }
        }
    }
}

fn contract(e: impl std::fmt::Display) -> ScorerError {
    ScorerError::Contract(e.to_string())
}

impl<T: Transport> ScorerBackend for ExternalBackend<T> {
    fn name(&self) -> &str {
        &self.name
    }

    fn score_tokens(&self, text: &str) -> Result<TokenScores, ScorerError> {
        let v = self.call("score", &json!({ "text": text }))?;
        let r: ScoreResponse = serde_json::from_value(v).map_err(contract)?;
        TokenScores::new(r.tokens, r.logprobs, r.ranks, r.entropies).map_err(contract)
    }

    fn next_token_distribution(&self, context: &[String]) -> Result<NextTokenDistribution, ScorerError> {
        let v = self.call("distribution", &json!({ "context": context }))?;
        let r: DistributionResponse = serde_json::from_value(v).map_err(contract)?;
        NextTokenDistribution::new(r.support, r.probs).map_err(contract)
    }
}

/// Builds the backend described by `spec`, wrapped in the cache when given.
pub fn open_backend(spec: &BackendSpec, cache: Option<Arc<ScoreCache>>) -> Result<DynBackend> {
    let inner: DynBackend = match spec {
        BackendSpec::Unigram(path) => Box::new(load_unigram(path)?),
        BackendSpec::Http(base) => Box::new(ExternalBackend::new(base.clone(), HttpTransport::new(base.clone(), Duration::from_secs(60)))),
    };
    Ok(match cache {
        Some(c) => Box::new(CachedBackend::new(inner, c)),
        None => inner,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_specs() {
        assert_eq!(BackendSpec::parse("unigram:ref.txt").unwrap(), BackendSpec::Unigram("ref.txt".into()));
        assert_eq!(BackendSpec::parse("http://localhost:8080/").unwrap(), BackendSpec::Http("http://localhost:8080".into()));
        assert!(BackendSpec::parse("https://x").is_err());
        assert!(BackendSpec::parse("unigram:").is_err());
        assert!(BackendSpec::parse("gpt2").is_err());
    }

    #[test]
    fn unigram_names_follow_content() {
        let dir = tempfile::tempdir().unwrap();
        let a = dir.path().join("a.txt");
        let b = dir.path().join("b.txt");
        std::fs::write(&a, "a a b").unwrap();
        std::fs::write(&b, "a b b").unwrap();
        let (ua, ub) = (load_unigram(&a).unwrap(), load_unigram(&b).unwrap());
        assert_ne!(ua.name(), ub.name());
        let saved = dir.path().join("a.json");
        std::fs::write(&saved, serde_json::to_string(&ua).unwrap()).unwrap();
        let back = load_unigram(&saved).unwrap();
        assert_eq!(back.score_tokens("a b").unwrap(), ua.score_tokens("a b").unwrap());
    }
}
