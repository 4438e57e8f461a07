use std::hash::Hasher;

use fnv::FnvHasher;

use super::{EmbedError, Embedder, EmbeddingVector};
use crate::scalar::Real;

pub const DEFAULT_HASH_DIM: usize = 1024;

/// 64-bit FNV-1a over raw bytes.
pub fn fnv1a(bytes: &[u8]) -> u64 {
    let mut h = FnvHasher::default();
    h.write(bytes);
    h.finish()
}

/// Offline embedder: lowercased character trigrams hashed into a
/// term-frequency vector, then L2-normalized.
///
/// Text shorter than three characters is treated as a single gram. Empty
/// text yields the flagged zero vector.
#[derive(Debug, Clone)]
pub struct HashTrigramEmbedder {
    dim: usize,
    model_id: String,
}

impl HashTrigramEmbedder {
    pub fn new(dim: usize) -> Self {
        assert!(dim > 0, "embedding dimension must be positive");
        Self {
            dim,
            model_id: format!("hash-trigram-fnv1a-{dim}"),
        }
    }

    /// Bucket index of one gram.
    pub fn bucket(&self, gram: &str) -> usize {
        (fnv1a(gram.as_bytes()) % self.dim as u64) as usize
    }

    pub fn embed_one<F: Real>(&self, text: &str) -> EmbeddingVector<F> {
        let chars: Vec<char> = text.to_lowercase().chars().collect();
        if chars.is_empty() {
            return EmbeddingVector::empty_text(self.dim, &self.model_id);
        }
        let mut counts = vec![F::zero(); self.dim];
        let mut gram = String::with_capacity(12);
        let mut add = |window: &[char]| {
            gram.clear();
            gram.extend(window);
            let slot = &mut counts[self.bucket(&gram)];
            *slot = *slot + F::one();
        };
        if chars.len() < 3 {
            add(&chars);
        } else {
            chars.windows(3).for_each(add);
        }
        EmbeddingVector::new(counts, &self.model_id)
            .expect("finite counts")
            .normalized()
    }
}

impl<F: Real> Embedder<F> for HashTrigramEmbedder {
    fn model_id(&self) -> &str {
        &self.model_id
    }

    fn dim(&self) -> usize {
        self.dim
    }

    fn embed_batch(&self, texts: &[String]) -> Result<Vec<EmbeddingVector<F>>, EmbedError> {
        Ok(texts.iter().map(|t| self.embed_one(t)).collect())
    }
}
