//! Content-addressed on-disk cache of backend responses.

use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, RwLock};

use mgtbench_core::scorer::{NextTokenDistribution, ScorerBackend, ScorerError, TokenScores};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

#[derive(Serialize, Deserialize)]
struct Record<T> {
    backend: String,
    kind: String,
    value: T,
}

/// One JSON file per response under `<dir>/<first two hex digits>/<sha256>.json`.
/// Writes go to a temporary file and are renamed into place, so readers never
/// observe partial records. Many readers may share the cache with one writer.
#[derive(Debug)]
pub struct ScoreCache {
    dir: PathBuf,
    lock: RwLock<()>,
    hits: AtomicU64,
    misses: AtomicU64,
    tmp_counter: AtomicU64,
}

impl ScoreCache {
    pub fn open(dir: impl Into<PathBuf>) -> std::io::Result<Self> {
        let dir = dir.into();
        std::fs::create_dir_all(&dir)?;
        Ok(ScoreCache {
            dir,
            lock: RwLock::new(()),
            hits: AtomicU64::new(0),
            misses: AtomicU64::new(0),
            tmp_counter: AtomicU64::new(0),
        })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn key(backend: &str, kind: &str, payload: &str) -> String {
        let mut h = Sha256::new();
        for part in [backend, kind, payload] {
            h.update(part.as_bytes());
            h.update([0u8]);
        }
        hex::encode(h.finalize())
    }

    fn path(&self, key: &str) -> PathBuf {
        self.dir.join(&key[..2]).join(format!("{key}.json"))
    }

    pub fn get<T: DeserializeOwned>(&self, backend: &str, kind: &str, payload: &str) -> Option<T> {
        let path = self.path(&Self::key(backend, kind, payload));
        let _guard = self.lock.read().unwrap_or_else(|e| e.into_inner());
        let found = std::fs::read(&path)
            .ok()
            .and_then(|bytes| serde_json::from_slice::<Record<T>>(&bytes).ok())
            .filter(|r| r.backend == backend && r.kind == kind)
            .map(|r| r.value);
        let counter = if found.is_some() { &self.hits } else { &self.misses };
        counter.fetch_add(1, Ordering::Relaxed);
        found
    }

    pub fn put<T: Serialize>(&self, backend: &str, kind: &str, payload: &str, value: &T) -> std::io::Result<()> {
        let key = Self::key(backend, kind, payload);
        let path = self.path(&key);
        let dir = path.parent().expect("cache paths have a parent");
        let record = Record { backend: backend.to_string(), kind: kind.to_string(), value };
        let bytes = serde_json::to_vec(&record).map_err(std::io::Error::other)?;
        let _guard = self.lock.write().unwrap_or_else(|e| e.into_inner());
        std::fs::create_dir_all(dir)?;
        let n = self.tmp_counter.fetch_add(1, Ordering::Relaxed);
        let tmp = dir.join(format!(".{key}.{}.{n}.tmp", std::process::id()));
        std::fs::write(&tmp, bytes)?;
        std::fs::rename(&tmp, &path)
    }

    pub fn hits(&self) -> u64 {
        self.hits.load(Ordering::Relaxed)
    }

    pub fn misses(&self) -> u64 {
        self.misses.load(Ordering::Relaxed)
    }
}

/// Serves `score_tokens` and `next_token_distribution` from the cache,
/// delegating to the wrapped backend on a miss. Cache write failures are
/// ignored: the response is still returned.
pub struct CachedBackend<B> {
    inner: B,
    cache: Arc<ScoreCache>,
}

impl<B: ScorerBackend> CachedBackend<B> {
    pub fn new(inner: B, cache: Arc<ScoreCache>) -> Self {
        CachedBackend { inner, cache }
    }

    pub fn cache(&self) -> &ScoreCache {
        &self.cache
    }

    pub fn into_inner(self) -> B {
        self.inner
    }
}

const CONTEXT_SEP: &str = "\u{1f}";

impl<B: ScorerBackend> ScorerBackend for CachedBackend<B> {
    fn name(&self) -> &str {
        self.inner.name()
    }

    fn score_tokens(&self, text: &str) -> Result<TokenScores, ScorerError> {
        let name = self.inner.name();
        if let Some(s) = self.cache.get::<TokenScores>(name, "score", text).filter(|s| s.validate().is_ok()) {
            return Ok(s);
        }
        let s = self.inner.score_tokens(text)?;
        let _ = self.cache.put(name, "score", text, &s);
        Ok(s)
    }

    fn next_token_distribution(&self, context: &[String]) -> Result<NextTokenDistribution, ScorerError> {
        let name = self.inner.name();
        let payload = context.join(CONTEXT_SEP);
        if let Some(d) = self
            .cache
            .get::<NextTokenDistribution>(name, "distribution", &payload)
            .and_then(|d| NextTokenDistribution::new(d.support().to_vec(), d.probs().to_vec()).ok())
        {
            return Ok(d);
        }
        let d = self.inner.next_token_distribution(context)?;
        let _ = self.cache.put(name, "distribution", &payload, &d);
        Ok(d)
    }
}
