//! Similarity scoring and top-J candidate table retrieval.

use std::collections::{BTreeSet, HashMap};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::embed::EmbeddingVector;
use crate::scalar::Real;
use crate::schema::{name_key, same_name, Schema, Table};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum RetrieveError {
    #[error("dimension mismatch: {left} vs {right}")]
    DimensionMismatch { left: usize, right: usize },
    #[error("cosine similarity of a zero vector is undefined")]
    ZeroVector,
    #[error("J must be at least 1")]
    InvalidJ,
    #[error("candidate corpus is empty")]
    EmptyCorpus,
    #[error("no embedding for {0}")]
    MissingEmbedding(String),
}

/// Cosine similarity, `dot(a, b) / (|a| |b|)`.
pub fn cosine_similarity<F: Real>(a: &EmbeddingVector<F>, b: &EmbeddingVector<F>) -> Result<F, RetrieveError> {
    cosine(a.values(), b.values())
}

pub(crate) fn cosine<F: Real>(a: &[F], b: &[F]) -> Result<F, RetrieveError> {
    if a.len() != b.len() {
        return Err(RetrieveError::DimensionMismatch {
            left: a.len(),
            right: b.len(),
        });
    }
    let (mut dot, mut na, mut nb) = (F::zero(), F::zero(), F::zero());
    for (&x, &y) in a.iter().zip(b) {
        dot = dot + x * y;
        na = na + x * x;
        nb = nb + y * y;
    }
    if na.is_zero() || nb.is_zero() {
        return Err(RetrieveError::ZeroVector);
    }
    // Rounding can push |cos| a hair past 1.
    let c = dot / (na.sqrt() * nb.sqrt());
    Ok(c.max(-F::one()).min(F::one()))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoredTable<F> {
    pub table: String,
    pub score: F,
}

/// The `j` best-scoring corpus entries, by descending score with ties
/// broken by corpus order.
pub fn retrieve_top_j<F: Real>(
    query: &EmbeddingVector<F>,
    corpus: &[(String, EmbeddingVector<F>)],
    j: usize,
) -> Result<Vec<ScoredTable<F>>, RetrieveError> {
    if j == 0 {
        return Err(RetrieveError::InvalidJ);
    }
    if corpus.is_empty() {
        return Err(RetrieveError::EmptyCorpus);
    }
    let mut scored = corpus
        .iter()
        .enumerate()
        .map(|(i, (_, v))| cosine_similarity(query, v).map(|s| (i, s)))
        .collect::<Result<Vec<_>, _>>()?;
    // Stable sort keeps corpus order among equal scores.
    scored.sort_by(|a, b| b.1.partial_cmp(&a.1).expect("finite scores"));
    Ok(scored
        .into_iter()
        .take(j)
        .map(|(i, score)| ScoredTable {
            table: corpus[i].0.clone(),
            score,
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttributeHits<F> {
    pub attribute: String,
    pub hits: Vec<ScoredTable<F>>,
}

/// Target tables retrieved for one source table.
///
/// `tables` is the union of all per-attribute hits (plus any guided
/// tables), kept in target-schema order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidateSet<F> {
    pub source_table: String,
    pub tables: Vec<String>,
    pub per_attribute_hits: Vec<AttributeHits<F>>,
}

impl<F: Real> CandidateSet<F> {
    pub fn len(&self) -> usize {
        self.tables.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tables.is_empty()
    }

    pub fn contains(&self, table: &str) -> bool {
        self.tables.iter().any(|t| same_name(t, table))
    }

    /// Every table of the target, used when retrieval is switched off.
    pub fn all_tables(source_table: &str, target: &Schema) -> Self {
        Self {
            source_table: source_table.to_string(),
            tables: target.tables.iter().map(|t| t.name.clone()).collect(),
            per_attribute_hits: Vec::new(),
        }
    }

    /// Adds a table, keeping target order. Returns whether it was new.
    pub fn insert(&mut self, table: &str, target_order: &[String]) -> bool {
        if self.contains(table) {
            return false;
        }
        let rank = |name: &str| {
            target_order
                .iter()
                .position(|t| same_name(t, name))
                .unwrap_or(usize::MAX)
        };
        let pos = self
            .tables
            .iter()
            .position(|t| rank(t) > rank(table))
            .unwrap_or(self.tables.len());
        self.tables.insert(pos, table.to_string());
        true
    }
}

/// Retrieves the top-`j` target tables for every attribute of
/// `source_table` and unions them.
///
/// `attribute_vectors` maps attribute names (any casing) to the
/// embeddings of their documents; `target_vectors` lists target table
/// embeddings in schema order.
pub fn build_candidate_set<F: Real>(
    source_table: &Table,
    attribute_vectors: &[(String, EmbeddingVector<F>)],
    target_vectors: &[(String, EmbeddingVector<F>)],
    j: usize,
) -> Result<CandidateSet<F>, RetrieveError> {
    let lookup: HashMap<String, &EmbeddingVector<F>> =
        attribute_vectors.iter().map(|(a, v)| (name_key(a), v)).collect();
    let mut chosen = BTreeSet::new();
    let mut per_attribute_hits = Vec::with_capacity(source_table.attributes.len());
    for attr in &source_table.attributes {
        let query = lookup
            .get(&name_key(&attr.name))
            .ok_or_else(|| RetrieveError::MissingEmbedding(format!("{}.{}", source_table.name, attr.name)))?;
        let hits = retrieve_top_j(query, target_vectors, j)?;
        for hit in &hits {
            let idx = target_vectors
                .iter()
                .position(|(t, _)| t == &hit.table)
                .expect("hit comes from corpus");
            chosen.insert(idx);
        }
        per_attribute_hits.push(AttributeHits {
            attribute: attr.name.clone(),
            hits,
        });
    }
    Ok(CandidateSet {
        source_table: source_table.name.clone(),
        tables: chosen.into_iter().map(|i| target_vectors[i].0.clone()).collect(),
        per_attribute_hits,
    })
}
