//! Embedding vectors and the embedder abstraction.

mod cache;
mod hash;
mod remote;

pub use cache::{CacheRecord, CachedEmbedder, EmbeddingCache};
pub use hash::{fnv1a, HashTrigramEmbedder, DEFAULT_HASH_DIM};
pub use remote::RemoteEmbedder;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::docgen::Document;
use crate::http::RemoteError;
use crate::scalar::Real;

#[derive(Debug, Error)]
pub enum EmbedError {
    #[error(transparent)]
    Remote(#[from] RemoteError),
    #[error("invalid embedding: {0}")]
    InvalidVector(String),
    #[error("embedding has dimension {got}, expected {expected}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("embedding cache: {0}")]
    Cache(#[from] std::io::Error),
}

/// A fixed-length embedding produced by one model.
///
/// The zero vector is only produced for empty text and is flagged as such.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingVector<F> {
    values: Vec<F>,
    model_id: String,
    empty_text: bool,
}

impl<F: Real> EmbeddingVector<F> {
    pub fn new(values: Vec<F>, model_id: impl Into<String>) -> Result<Self, EmbedError> {
        if values.is_empty() {
            return Err(EmbedError::InvalidVector("zero-dimensional vector".into()));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(EmbedError::InvalidVector("non-finite component".into()));
        }
        Ok(Self {
            values,
            model_id: model_id.into(),
            empty_text: false,
        })
    }

    /// The flagged zero vector standing in for empty text.
    pub fn empty_text(dim: usize, model_id: impl Into<String>) -> Self {
        Self {
            values: vec![F::zero(); dim.max(1)],
            model_id: model_id.into(),
            empty_text: true,
        }
    }

    pub fn values(&self) -> &[F] {
        &self.values
    }

    pub fn dim(&self) -> usize {
        self.values.len()
    }

    pub fn model_id(&self) -> &str {
        &self.model_id
    }

    pub fn is_empty_text(&self) -> bool {
        self.empty_text
    }

    pub fn norm(&self) -> F {
        self.values.iter().fold(F::zero(), |acc, &v| acc + v * v).sqrt()
    }

    pub fn is_zero(&self) -> bool {
        self.values.iter().all(|v| v.is_zero())
    }

    /// L2-normalized copy; the zero vector is returned unchanged.
    pub fn normalized(&self) -> Self {
        let norm = self.norm();
        if norm.is_zero() {
            return self.clone();
        }
        Self {
            values: self.values.iter().map(|&v| v / norm).collect(),
            model_id: self.model_id.clone(),
            empty_text: self.empty_text,
        }
    }

    /// Converts to another float type.
    pub fn cast<G: Real>(&self) -> EmbeddingVector<G> {
        EmbeddingVector {
            values: self
                .values
                .iter()
                .map(|v| G::from_f64_lossy(v.to_f64_lossy()))
                .collect(),
            model_id: self.model_id.clone(),
            empty_text: self.empty_text,
        }
    }
}

/// Turns text into vectors. All vectors from one embedder share `dim` and
/// `model_id`.
pub trait Embedder<F: Real>: Send + Sync {
    fn model_id(&self) -> &str;

    fn dim(&self) -> usize;

    /// Embeds a batch, preserving input order.
    fn embed_batch(&self, texts: &[String]) -> Result<Vec<EmbeddingVector<F>>, EmbedError>;

    fn embed_text(&self, text: &str) -> Result<EmbeddingVector<F>, EmbedError> {
        let mut out = self.embed_batch(&[text.to_string()])?;
        out.pop()
            .ok_or_else(|| EmbedError::InvalidVector("embedder returned no vector".into()))
    }
}

/// Embeds the full rendered text of a document, highlight line included.
pub fn embed<F: Real>(embedder: &dyn Embedder<F>, doc: &Document) -> Result<EmbeddingVector<F>, EmbedError> {
    embedder.embed_text(&doc.text())
}

/// Embeds many documents in one batch.
pub fn embed_documents<'a, F: Real>(
    embedder: &dyn Embedder<F>,
    docs: impl IntoIterator<Item = &'a Document>,
) -> Result<Vec<EmbeddingVector<F>>, EmbedError> {
    let texts: Vec<String> = docs.into_iter().map(Document::text).collect();
    if texts.is_empty() {
        return Ok(Vec::new());
    }
    embedder.embed_batch(&texts)
}

/// Serializable description of which embedder to use.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum EmbedderSpec {
    LocalHashTrigram {
        dim: usize,
    },
    Remote {
        /// Falls back to `REMATCH_API_BASE` when absent.
        #[serde(default)]
        base_url: Option<String>,
        model: String,
        dim: usize,
        #[serde(default = "default_in_flight")]
        max_in_flight: usize,
    },
}

fn default_in_flight() -> usize {
    8
}

impl Default for EmbedderSpec {
    fn default() -> Self {
        EmbedderSpec::LocalHashTrigram { dim: DEFAULT_HASH_DIM }
    }
}

impl EmbedderSpec {
    pub fn dim(&self) -> usize {
        match self {
            EmbedderSpec::LocalHashTrigram { dim } | EmbedderSpec::Remote { dim, .. } => *dim,
        }
    }

    pub fn validate(&self) -> Result<(), String> {
        match self {
            EmbedderSpec::LocalHashTrigram { dim: 0 } | EmbedderSpec::Remote { dim: 0, .. } => {
                Err("embedding dimension must be positive".into())
            }
            EmbedderSpec::Remote { model, .. } if model.trim().is_empty() => {
                Err("remote embedder needs a model".into())
            }
            EmbedderSpec::Remote { max_in_flight: 0, .. } => Err("max_in_flight must be positive".into()),
            _ => Ok(()),
        }
    }

    /// Instantiates the embedder. Remote credentials come from the
    /// environment (see [`crate::http::ApiEnv`]).
    pub fn build<F: Real>(&self) -> Result<Box<dyn Embedder<F>>, String> {
        self.validate()?;
        Ok(match self {
            EmbedderSpec::LocalHashTrigram { dim } => Box::new(HashTrigramEmbedder::new(*dim)),
            EmbedderSpec::Remote {
                base_url,
                model,
                dim,
                max_in_flight,
            } => {
                let env = crate::http::ApiEnv::from_env();
                let base = base_url
                    .clone()
                    .or(env.base_url)
                    .ok_or("remote embedder needs a base URL (REMATCH_API_BASE)")?;
                Box::new(RemoteEmbedder::new(base, model.clone(), *dim, env.api_key).with_max_in_flight(*max_in_flight))
            }
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_non_finite_and_empty() {
        assert!(EmbeddingVector::<f64>::new(vec![], "m").is_err());
        assert!(EmbeddingVector::new(vec![1.0, f64::NAN], "m").is_err());
        assert!(EmbeddingVector::new(vec![1.0f32, f32::INFINITY], "m").is_err());
    }

    #[test]
    fn normalization() {
        let v = EmbeddingVector::new(vec![3.0f64, 4.0], "m").unwrap();
        assert_eq!(v.norm(), 5.0);
        let n = v.normalized();
        assert!((n.norm() - 1.0).abs() < 1e-12);
        assert_eq!(n.values(), &[0.6, 0.8]);
        let z = EmbeddingVector::<f64>::empty_text(4, "m");
        assert!(z.is_zero() && z.is_empty_text());
        assert_eq!(z.normalized(), z);
    }

    #[test]
    fn spec_validation_and_serde() {
        assert!(EmbedderSpec::LocalHashTrigram { dim: 0 }.validate().is_err());
        let spec = EmbedderSpec::default();
        let json = serde_json::to_value(&spec).unwrap();
        assert_eq!(json, serde_json::json!({"kind": "local-hash-trigram", "dim": 1024}));
        let remote: EmbedderSpec =
            serde_json::from_value(serde_json::json!({"kind": "remote", "model": "ada", "dim": 1536})).unwrap();
        assert_eq!(
            remote,
            EmbedderSpec::Remote {
                base_url: None,
                model: "ada".into(),
                dim: 1536,
                max_in_flight: 8
            }
        );
    }

    #[test]
    fn cast_between_float_types() {
        let v = EmbeddingVector::new(vec![0.5f64, -0.25], "m").unwrap();
        let w: EmbeddingVector<f32> = v.cast();
        assert_eq!(w.values(), &[0.5f32, -0.25]);
        assert_eq!(w.model_id(), "m");
    }
}
