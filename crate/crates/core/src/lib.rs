//! Retrieval-enhanced schema matching.
//!
//! Schemas are rendered as documents ([`docgen`]), target tables are
//! retrieved per source attribute by embedding similarity ([`retrieve`]),
//! and a ranker picks the top-K target attributes from the retrieved
//! tables ([`rank`]). [`pipeline`] runs the whole thing and [`eval`]
//! scores the result.
//!
//! The numeric code is generic: embedding math over [`scalar::Real`]
//! (`f32`, `f64`) and metrics over [`scalar::Scalar`], which also admits
//! exact rationals. The aliases below fix the types used by the binaries.

pub mod docgen;
pub mod embed;
pub mod eval;
pub mod http;
pub mod pipeline;
pub mod rank;
pub mod retrieve;
pub mod scalar;
pub mod schema;

/// Default floating-point type for embeddings and scores.
pub type Real64 = f64;
/// Exact fraction type for metrics.
pub type ExactFraction = num_rational::Ratio<i64>;
pub type Embedding = embed::EmbeddingVector<Real64>;
pub type Candidates = retrieve::CandidateSet<Real64>;
pub type DefaultBackends = pipeline::Backends<Real64>;

pub use docgen::{build_corpora, Corpus, DocMode, Document};
pub use eval::{accuracy_at_k, f1_argmax, make_report, EvalError, EvalReport};
pub use pipeline::{run_rematch, PipelineConfig, PipelineError, PredictionMatrix, RunManifest, RunOptions};
pub use rank::{RankedRow, Target};
pub use schema::{AttrRef, Attribute, GroundTruth, MatchPair, Schema, SchemaError, Table};
