use std::collections::HashMap;
use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{EmbedError, Embedder, EmbeddingVector};
use crate::scalar::Real;

pub const CACHE_FILE: &str = "embeddings.jsonl";

/// One persisted cache entry (one JSON object per line).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CacheRecord {
    pub model_id: String,
    pub content_hash: String,
    pub dim: usize,
    pub values: Vec<f64>,
}

pub fn content_hash(text: &str) -> String {
    hex::encode(Sha256::digest(text.as_bytes()))
}

/// Embedding cache keyed by `(model_id, sha256(text))`, optionally backed by
/// an append-only JSON-lines file.
#[derive(Debug, Default)]
pub struct EmbeddingCache {
    entries: Mutex<HashMap<(String, String), Vec<f64>>>,
    file: Option<Mutex<File>>,
    path: Option<PathBuf>,
}

impl EmbeddingCache {
    pub fn in_memory() -> Self {
        Self::default()
    }

    /// Opens (or creates) `dir/embeddings.jsonl`. Unreadable lines, e.g. a
    /// torn final write, are skipped.
    pub fn open(dir: impl AsRef<Path>) -> std::io::Result<Self> {
        let dir = dir.as_ref();
        std::fs::create_dir_all(dir)?;
        let path = dir.join(CACHE_FILE);
        let mut entries = HashMap::new();
        if path.exists() {
            for line in BufReader::new(File::open(&path)?).lines() {
                let line = line?;
                match serde_json::from_str::<CacheRecord>(&line) {
                    Ok(r) if r.values.len() == r.dim => {
                        entries.insert((r.model_id, r.content_hash), r.values);
                    }
                    _ => tracing::warn!(path = %path.display(), "skipping malformed cache line"),
                }
            }
        }
        let file = OpenOptions::new().create(true).append(true).open(&path)?;
        Ok(Self {
            entries: Mutex::new(entries),
            file: Some(Mutex::new(file)),
            path: Some(path),
        })
    }

    pub fn path(&self) -> Option<&Path> {
        self.path.as_deref()
    }

    pub fn len(&self) -> usize {
        self.entries.lock().expect("cache lock").len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn get(&self, model_id: &str, text: &str) -> Option<Vec<f64>> {
        self.entries
            .lock()
            .expect("cache lock")
            .get(&(model_id.to_string(), content_hash(text)))
            .cloned()
    }

    pub fn put(&self, model_id: &str, text: &str, values: Vec<f64>) -> std::io::Result<()> {
        let key = (model_id.to_string(), content_hash(text));
        let mut entries = self.entries.lock().expect("cache lock");
        if entries.contains_key(&key) {
            return Ok(());
        }
        if let Some(file) = &self.file {
            let record = CacheRecord {
                model_id: key.0.clone(),
                content_hash: key.1.clone(),
                dim: values.len(),
                values: values.clone(),
            };
            let mut line = serde_json::to_string(&record).map_err(std::io::Error::other)?;
            line.push('\n');
            let mut file = file.lock().expect("cache file lock");
            file.write_all(line.as_bytes())?;
            file.flush()?;
        }
        entries.insert(key, values);
        Ok(())
    }
}

/// Wraps an embedder so each distinct text is embedded at most once.
pub struct CachedEmbedder<F: Real> {
    inner: Box<dyn Embedder<F>>,
    cache: Arc<EmbeddingCache>,
}

impl<F: Real> CachedEmbedder<F> {
    pub fn new(inner: Box<dyn Embedder<F>>, cache: Arc<EmbeddingCache>) -> Self {
        Self { inner, cache }
    }

    pub fn cache(&self) -> &Arc<EmbeddingCache> {
        &self.cache
    }
}

impl<F: Real> Embedder<F> for CachedEmbedder<F> {
    fn model_id(&self) -> &str {
        self.inner.model_id()
    }

    fn dim(&self) -> usize {
        self.inner.dim()
    }

    fn embed_batch(&self, texts: &[String]) -> Result<Vec<EmbeddingVector<F>>, EmbedError> {
        let model = self.inner.model_id().to_string();
        let mut out: Vec<Option<EmbeddingVector<F>>> = Vec::with_capacity(texts.len());
        let mut missing = Vec::new();
        for (i, text) in texts.iter().enumerate() {
            match self.cache.get(&model, text) {
                Some(values) if text.is_empty() => {
                    out.push(Some(EmbeddingVector::empty_text(values.len(), &model)));
                }
                Some(values) => {
                    let values = values.into_iter().map(F::from_f64_lossy).collect();
                    out.push(Some(EmbeddingVector::new(values, &model)?));
                }
                None => {
                    out.push(None);
                    missing.push(i);
                }
            }
        }
        if !missing.is_empty() {
            let batch: Vec<String> = missing.iter().map(|&i| texts[i].clone()).collect();
            let fresh = self.inner.embed_batch(&batch)?;
            for (&i, vector) in missing.iter().zip(fresh) {
                let values = vector.values().iter().map(|v| v.to_f64_lossy()).collect();
                self.cache.put(&model, &texts[i], values)?;
                out[i] = Some(vector);
            }
        }
        Ok(out.into_iter().map(|v| v.expect("filled")).collect())
    }
}
