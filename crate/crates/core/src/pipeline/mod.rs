//! End-to-end matching runs, guidance, grid search and run manifests.

mod checkpoint;
mod grid;
mod guidance;
mod manifest;

pub use checkpoint::{run_fingerprint, CheckpointStore, TableCheckpoint};
pub use grid::{grid_search, GridCell, GridReport};
pub use guidance::{apply_guidance, auto_guidance, validate_guidance_pair, GuidanceError};
pub use manifest::{
    read_predictions_csv, write_predictions_csv, CandidateCount, DiagnosticsSummary, RunManifest, MANIFEST_FILE,
    MANIFEST_FORMAT_VERSION, PREDICTIONS_FILE,
};

use std::path::PathBuf;
use std::sync::Arc;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::docgen::{build_corpora, Corpus, DocMode};
use crate::embed::{embed_documents, CachedEmbedder, EmbedError, Embedder, EmbedderSpec, EmbeddingCache};
use crate::eval::{accuracy_at_k, make_report, EvalError, EvalReport};
use crate::http::ApiEnv;
use crate::rank::{
    create_topk_mapping, Diagnostic, MappingRequest, RankError, RankedRow, Ranker, RankerSpec, TranscriptLog,
};
use crate::retrieve::{build_candidate_set, CandidateSet, RetrieveError};
use crate::scalar::{Real, Scalar};
use crate::schema::{GroundTruth, MatchPair, Schema, SchemaError};

pub const DEFAULT_PROMPT_BUDGET_CHARS: usize = 100_000;
pub const DEFAULT_PARALLELISM: usize = 4;

fn default_parallelism() -> usize {
    DEFAULT_PARALLELISM
}

fn default_budget() -> usize {
    DEFAULT_PROMPT_BUDGET_CHARS
}

/// Settings for one matching run. `j: None` switches retrieval off and
/// sends every target table to the ranker.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineConfig {
    #[serde(rename = "j")]
    pub top_j: Option<usize>,
    #[serde(rename = "k")]
    pub top_k: usize,
    #[serde(default)]
    pub mode: DocMode,
    #[serde(default)]
    pub embedder: EmbedderSpec,
    #[serde(default)]
    pub ranker: RankerSpec,
    #[serde(default)]
    pub guidance: Vec<MatchPair>,
    #[serde(default)]
    pub tag: String,
    #[serde(default = "default_parallelism")]
    pub parallelism: usize,
    #[serde(default = "default_budget")]
    pub prompt_budget_chars: usize,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            top_j: Some(3),
            top_k: 3,
            mode: DocMode::Full,
            embedder: EmbedderSpec::default(),
            ranker: RankerSpec::default(),
            guidance: Vec::new(),
            tag: String::new(),
            parallelism: DEFAULT_PARALLELISM,
            prompt_budget_chars: DEFAULT_PROMPT_BUDGET_CHARS,
        }
    }
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<(), PipelineError> {
        let bad = |m: &str| Err(PipelineError::InvalidConfig(m.to_string()));
        if self.top_j == Some(0) {
            return bad("J must be at least 1");
        }
        if self.top_k == 0 {
            return bad("K must be at least 1");
        }
        if self.parallelism == 0 {
            return bad("parallelism must be at least 1");
        }
        if self.prompt_budget_chars == 0 {
            return bad("prompt budget must be positive");
        }
        self.embedder.validate().map_err(PipelineError::InvalidConfig)
    }
}

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("backend setup: {0}")]
    Backend(String),
    #[error(transparent)]
    Schema(#[from] SchemaError),
    #[error(transparent)]
    Guidance(#[from] GuidanceError),
    #[error(transparent)]
    Embed(#[from] EmbedError),
    #[error(transparent)]
    Retrieve(#[from] RetrieveError),
    #[error("source table {table}: {source}")]
    Rank {
        table: String,
        #[source]
        source: RankError,
    },
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error("checkpoint: {0}")]
    Checkpoint(#[from] std::io::Error),
    #[error("run stopped after {completed} of {total} tables ({cause}); resume with token {resume_token}")]
    Partial {
        completed: usize,
        total: usize,
        resume_token: String,
        cause: String,
    },
}

/// The embedder and ranker a run talks to.
#[derive(Clone)]
pub struct Backends<F: Real = f64> {
    pub embedder: Arc<dyn Embedder<F>>,
    pub ranker: Arc<dyn Ranker>,
    pub transcript: Option<Arc<TranscriptLog>>,
}

impl<F: Real> Backends<F> {
    pub fn new(embedder: Arc<dyn Embedder<F>>, ranker: Arc<dyn Ranker>) -> Self {
        Self {
            embedder,
            ranker,
            transcript: None,
        }
    }

    pub fn with_transcript(mut self, log: Arc<TranscriptLog>) -> Self {
        self.transcript = Some(log);
        self
    }

    /// Builds backends from a config. The embedder is always cached: on
    /// disk under `REMATCH_CACHE_DIR` when set, in memory otherwise.
    pub fn from_config(config: &PipelineConfig) -> Result<Self, PipelineError> {
        let inner = config.embedder.build::<F>().map_err(PipelineError::Backend)?;
        let cache = match ApiEnv::from_env().cache_dir {
            Some(dir) => EmbeddingCache::open(&dir)?,
            None => EmbeddingCache::in_memory(),
        };
        let embedder: Arc<dyn Embedder<F>> = Arc::new(CachedEmbedder::new(inner, Arc::new(cache)));
        let ranker = config.ranker.build(embedder.clone()).map_err(PipelineError::Backend)?;
        Ok(Self::new(embedder, Arc::from(ranker)))
    }
}

/// What happened for one source table.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TableResult {
    pub source_table: String,
    /// Tables shown to the ranker, in target-schema order.
    pub candidate_tables: Vec<String>,
    pub diagnostics: Vec<Diagnostic>,
    pub ranker_calls: usize,
}

/// K ranked targets for every source attribute, with the configuration
/// that produced them. Contains no timing data, so equal inputs give equal
/// matrices.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictionMatrix {
    pub config: PipelineConfig,
    pub k: usize,
    pub rows: Vec<RankedRow>,
    pub tables: Vec<TableResult>,
}

impl PredictionMatrix {
    pub fn candidate_counts(&self) -> Vec<usize> {
        self.tables.iter().map(|t| t.candidate_tables.len()).collect()
    }

    /// Mean candidate-set size over source tables.
    pub fn avg_candidate_tables<S: Scalar>(&self) -> S {
        S::ratio(self.candidate_counts().iter().sum(), self.tables.len())
    }

    pub fn diagnostics(&self) -> impl Iterator<Item = &Diagnostic> {
        self.tables.iter().flat_map(|t| &t.diagnostics)
    }

    pub fn accuracy_at_k<S: Scalar>(&self, truth: &GroundTruth, k: usize) -> Result<S, EvalError> {
        accuracy_at_k(&self.rows, truth, k)
    }

    pub fn evaluate(&self, truth: &GroundTruth, k_values: &[usize]) -> Result<EvalReport, EvalError> {
        make_report(&self.rows, truth, k_values, self.avg_candidate_tables())
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TableTiming {
    pub source_table: String,
    pub millis: f64,
    /// Loaded from a checkpoint rather than computed.
    pub resumed: bool,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RunTimings {
    pub total_millis: f64,
    pub target_embedding_millis: f64,
    pub tables: Vec<TableTiming>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunOutcome {
    pub matrix: PredictionMatrix,
    pub timings: RunTimings,
}

#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    /// Root directory for per-table checkpoints. Tables already
    /// checkpointed under the run's fingerprint are not recomputed.
    pub checkpoint_dir: Option<PathBuf>,
}

fn millis(since: Instant) -> f64 {
    since.elapsed().as_secs_f64() * 1000.0
}

struct RunContext<'a, F: Real> {
    source: &'a Schema,
    target: &'a Schema,
    config: &'a PipelineConfig,
    backends: &'a Backends<F>,
    source_docs: Corpus,
    target_docs: Corpus,
    target_vectors: Vec<(String, crate::embed::EmbeddingVector<F>)>,
}

impl<F: Real> RunContext<'_, F> {
    fn candidates(&self, index: usize) -> Result<CandidateSet<F>, PipelineError> {
        let table = &self.source.tables[index];
        let candidates = match self.config.top_j {
            None => CandidateSet::all_tables(&table.name, self.target),
            Some(j) => {
                let docs: Vec<_> = self.source_docs.attribute_docs(&table.name).collect();
                let vectors = embed_documents(self.backends.embedder.as_ref(), docs.iter().copied())?;
                let named: Vec<(String, _)> = docs
                    .iter()
                    .map(|d| d.origin.attribute.clone().unwrap_or_default())
                    .zip(vectors)
                    .collect();
                build_candidate_set(table, &named, &self.target_vectors, j)?
            }
        };
        Ok(apply_guidance(candidates, &self.config.guidance, self.target)?)
    }

    fn table(&self, index: usize) -> Result<TableCheckpoint, PipelineError> {
        let table = &self.source.tables[index];
        let candidates = self.candidates(index)?;
        let mapping = create_topk_mapping(
            self.backends.ranker.as_ref(),
            &MappingRequest {
                source: self.source,
                target: self.target,
                source_docs: &self.source_docs,
                target_docs: &self.target_docs,
                mode: self.config.mode,
                source_table: table,
                candidate_tables: &candidates.tables,
                k: self.config.top_k,
                guidance: &self.config.guidance,
                budget_chars: self.config.prompt_budget_chars,
                transcript: self.backends.transcript.as_deref(),
            },
        )
        .map_err(|source| PipelineError::Rank {
            table: table.name.clone(),
            source,
        })?;
        Ok(TableCheckpoint {
            result: TableResult {
                source_table: table.name.clone(),
                candidate_tables: candidates.tables,
                diagnostics: mapping.diagnostics,
                ranker_calls: mapping.calls,
            },
            rows: mapping.rows,
        })
    }
}

/// Runs the full matching pipeline: documents, target embeddings, per-table
/// retrieval, guidance and ranking. Source tables are processed in
/// parallel; results keep source order.
///
/// With a checkpoint directory, each finished table is persisted; a failed
/// run returns [`PipelineError::Partial`] and a later call with the same
/// inputs only computes the missing tables.
pub fn run_rematch<F: Real>(
    source: &Schema,
    target: &Schema,
    config: &PipelineConfig,
    backends: &Backends<F>,
    options: &RunOptions,
) -> Result<RunOutcome, PipelineError> {
    let started = Instant::now();
    config.validate()?;
    source.validate()?;
    target.validate()?;
    if target.tables.is_empty() {
        return Err(PipelineError::InvalidConfig("target schema has no tables".into()));
    }
    for pair in &config.guidance {
        validate_guidance_pair(source, target, pair)?;
    }

    let (source_docs, target_docs) = build_corpora(source, target, config.mode);
    let embed_started = Instant::now();
    let target_vectors = if config.top_j.is_some() {
        let vectors = embed_documents(backends.embedder.as_ref(), target_docs.documents())?;
        target_docs
            .documents()
            .iter()
            .map(|d| d.origin.table.clone())
            .zip(vectors)
            .collect()
    } else {
        Vec::new()
    };
    let target_embedding_millis = millis(embed_started);

    let ctx = RunContext {
        source,
        target,
        config,
        backends,
        source_docs,
        target_docs,
        target_vectors,
    };
    let fingerprint = run_fingerprint(config, source, target);
    let store = options
        .checkpoint_dir
        .as_ref()
        .map(|dir| CheckpointStore::new(dir, &fingerprint));

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(config.parallelism)
        .build()
        .map_err(|e| PipelineError::Backend(e.to_string()))?;
    let results: Vec<(Result<TableCheckpoint, PipelineError>, TableTiming)> = pool.install(|| {
        (0..source.tables.len())
            .into_par_iter()
            .map(|i| {
                let t0 = Instant::now();
                let name = &source.tables[i].name;
                if let Some(cp) = store.as_ref().and_then(|s| s.load(i, name)) {
                    let timing = TableTiming {
                        source_table: name.clone(),
                        millis: millis(t0),
                        resumed: true,
                    };
                    return (Ok(cp), timing);
                }
                let result = ctx.table(i).and_then(|cp| {
                    if let Some(s) = &store {
                        s.save(i, &cp)?;
                    }
                    Ok(cp)
                });
                let timing = TableTiming {
                    source_table: name.clone(),
                    millis: millis(t0),
                    resumed: false,
                };
                (result, timing)
            })
            .collect()
    });

    let total = results.len();
    let completed = results.iter().filter(|(r, _)| r.is_ok()).count();
    let mut rows = Vec::with_capacity(source.attribute_count());
    let mut tables = Vec::with_capacity(total);
    let mut timings = Vec::with_capacity(total);
    let mut first_error = None;
    for (result, timing) in results {
        timings.push(timing);
        match result {
            Ok(cp) => {
                rows.extend(cp.rows);
                tables.push(cp.result);
            }
            Err(e) => {
                tracing::warn!("{e}");
                first_error.get_or_insert(e);
            }
        }
    }
    if let Some(e) = first_error {
        return Err(match store {
            Some(_) => PipelineError::Partial {
                completed,
                total,
                resume_token: fingerprint,
                cause: e.to_string(),
            },
            None => e,
        });
    }

    Ok(RunOutcome {
        matrix: PredictionMatrix {
            config: config.clone(),
            k: config.top_k,
            rows,
            tables,
        },
        timings: RunTimings {
            total_millis: millis(started),
            target_embedding_millis,
            tables: timings,
        },
    })
}
