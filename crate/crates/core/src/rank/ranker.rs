//! Ranker backends. A ranker turns a prompt into raw response text; parsing
//! and validation happen in the caller so every backend goes through the
//! same path.

use std::fs::{File, OpenOptions};
use std::io::Write;
use std::path::Path;
use std::sync::{Arc, Mutex};
use std::time::Duration;

use serde::{Deserialize, Serialize};

use super::{MatchPrompt, RankError};
use crate::docgen::{attribute_to_doc, DocMode};
use crate::embed::{Embedder, EmbeddingVector};
use crate::http::{join_url, ApiEnv, JsonClient, RemoteError};
use crate::retrieve::cosine;
use crate::scalar::Real;
use crate::schema::{Schema, NA};

/// Everything a ranker may look at for one call.
pub struct RankRequest<'a> {
    pub prompt: &'a MatchPrompt,
    pub source: &'a Schema,
    pub target: &'a Schema,
    pub mode: DocMode,
}

pub trait Ranker: Send + Sync {
    /// Short identifier recorded in transcripts and manifests.
    fn id(&self) -> String;

    fn rank(&self, request: &RankRequest<'_>) -> Result<String, RankError>;
}

/// Sampling parameters sent with every chat completion.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GenerationParams {
    pub temperature: f64,
    pub top_p: f64,
    pub max_tokens: u32,
    pub seed: u64,
    pub frequency_penalty: f64,
    pub presence_penalty: f64,
}

impl Default for GenerationParams {
    fn default() -> Self {
        Self {
            temperature: 0.5,
            top_p: 0.9,
            max_tokens: 4096,
            seed: 42,
            frequency_penalty: 0.0,
            presence_penalty: 0.0,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum RankerSpec {
    #[default]
    /// Offline ranker scoring attribute documents by embedding similarity.
    LocalSimilarityOracle,
    RemoteLlm {
        /// Falls back to `REMATCH_API_BASE`.
        #[serde(default)]
        base_url: Option<String>,
        /// Falls back to `REMATCH_GEN_MODEL`.
        #[serde(default)]
        model: Option<String>,
        #[serde(default)]
        params: GenerationParams,
    },
}

impl RankerSpec {
    /// Instantiates the ranker. The oracle scores with `embedder`.
    pub fn build<F: Real>(&self, embedder: Arc<dyn Embedder<F>>) -> Result<Box<dyn Ranker>, String> {
        Ok(match self {
            RankerSpec::LocalSimilarityOracle => Box::new(LocalOracleRanker::new(embedder)),
            RankerSpec::RemoteLlm {
                base_url,
                model,
                params,
            } => {
                let env = ApiEnv::from_env();
                let base = base_url
                    .clone()
                    .or(env.base_url)
                    .ok_or("remote ranker needs a base URL (REMATCH_API_BASE)")?;
                let model = model
                    .clone()
                    .or(env.gen_model)
                    .ok_or("remote ranker needs a model (REMATCH_GEN_MODEL)")?;
                Box::new(RemoteRanker::new(base, model, params.clone(), env.api_key))
            }
        })
    }
}

/// Ranks candidate attributes by the cosine similarity of their documents
/// plus the cosine similarity of their names.
///
/// Emits the same JSON shape a language model is asked for. When fewer than
/// K candidate attributes exist, the row ends with a single `NA`.
pub struct LocalOracleRanker<F: Real> {
    embedder: Arc<dyn Embedder<F>>,
}

impl<F: Real> LocalOracleRanker<F> {
    pub fn new(embedder: Arc<dyn Embedder<F>>) -> Self {
        Self { embedder }
    }
}

impl<F: Real> Ranker for LocalOracleRanker<F> {
    fn id(&self) -> String {
        format!("local-oracle/{}", self.embedder.model_id())
    }

    fn rank(&self, req: &RankRequest<'_>) -> Result<String, RankError> {
        let prompt = req.prompt;
        let src_table = req
            .source
            .table(&prompt.source_table)
            .ok_or_else(|| RankError::MissingDocument(format!("source table {}", prompt.source_table)))?;

        let mut candidates = Vec::new();
        let mut texts = Vec::new();
        let mut names = Vec::new();
        for name in &prompt.candidate_tables {
            let t = req
                .target
                .table(name)
                .ok_or_else(|| RankError::MissingDocument(format!("target table {name}")))?;
            for a in &t.attributes {
                candidates.push((t.name.clone(), a.name.clone()));
                texts.push(attribute_to_doc(req.target, t, a, req.mode).text());
                names.push(a.name.clone());
            }
        }
        let target_vecs = self.embedder.embed_batch(&texts)?;
        let target_names = self.embedder.embed_batch(&names)?;

        let mut src_texts = Vec::new();
        for name in &prompt.source_attributes {
            let a = src_table
                .attribute(name)
                .ok_or_else(|| RankError::MissingDocument(format!("{}.{name}", src_table.name)))?;
            src_texts.push(attribute_to_doc(req.source, src_table, a, req.mode).text());
        }
        let src_vecs = self.embedder.embed_batch(&src_texts)?;
        let src_names = self.embedder.embed_batch(&prompt.source_attributes)?;

        let k = prompt.k;
        let mut response = serde_json::Map::new();
        for (i, name) in prompt.source_attributes.iter().enumerate() {
            let scores: Vec<F> = target_vecs
                .iter()
                .zip(&target_names)
                .map(|(doc, tname)| similarity(&src_vecs[i], doc) + similarity(&src_names[i], tname))
                .collect();
            let mut entry = serde_json::Map::new();
            entry.insert("SRC_ENT".into(), src_table.name.clone().into());
            entry.insert("SRC_ATT".into(), name.clone().into());
            for (rank, (t, a)) in top_k(&scores, k).map(|c| &candidates[c]).enumerate() {
                entry.insert(format!("TGT_ENT{}", rank + 1), t.clone().into());
                entry.insert(format!("TGT_ATT{}", rank + 1), a.clone().into());
            }
            if candidates.len() < k {
                let slot = candidates.len() + 1;
                entry.insert(format!("TGT_ENT{slot}"), NA.into());
                entry.insert(format!("TGT_ATT{slot}"), NA.into());
            }
            response.insert((i + 1).to_string(), entry.into());
        }
        Ok(serde_json::Value::Object(response).to_string())
    }
}

fn similarity<F: Real>(a: &EmbeddingVector<F>, b: &EmbeddingVector<F>) -> F {
    cosine(a.values(), b.values()).unwrap_or_else(|_| F::zero())
}

/// Indices of the `k` highest scores; ties keep input order.
fn top_k<F: Real>(scores: &[F], k: usize) -> impl Iterator<Item = usize> {
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].partial_cmp(&scores[a]).expect("finite scores"));
    order.into_iter().take(k)
}

/// Chat-completions client.
pub struct RemoteRanker {
    url: String,
    model: String,
    params: GenerationParams,
    client: JsonClient,
}

impl RemoteRanker {
    pub fn new(
        base_url: impl AsRef<str>,
        model: impl Into<String>,
        params: GenerationParams,
        api_key: Option<String>,
    ) -> Self {
        Self {
            url: join_url(base_url.as_ref(), "chat/completions"),
            model: model.into(),
            params,
            client: JsonClient::new(api_key, Duration::from_secs(600)),
        }
    }

    pub fn with_retry(mut self, retry: crate::http::RetryPolicy) -> Self {
        self.client = self.client.with_retry(retry);
        self
    }
}

impl Ranker for RemoteRanker {
    fn id(&self) -> String {
        format!("remote/{}", self.model)
    }

    fn rank(&self, req: &RankRequest<'_>) -> Result<String, RankError> {
        let p = &self.params;
        let body = serde_json::json!({
            "model": self.model,
            "messages": [
                {"role": "system", "content": req.prompt.system_text},
                {"role": "user", "content": req.prompt.user_text},
            ],
            "temperature": p.temperature,
            "top_p": p.top_p,
            "max_tokens": p.max_tokens,
            "seed": p.seed,
            "frequency_penalty": p.frequency_penalty,
            "presence_penalty": p.presence_penalty,
        });
        let value = self.client.post_json(&self.url, &body)?;
        value["choices"][0]["message"]["content"]
            .as_str()
            .map(str::to_string)
            .ok_or_else(|| {
                RankError::Remote(RemoteError {
                    url: self.url.clone(),
                    message: "response has no choices[0].message.content".into(),
                    status: Some(200),
                    retry_after_secs: None,
                    attempts: 1,
                })
            })
    }
}

/// One ranker call as written to the transcript.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TranscriptRecord {
    pub timestamp: String,
    pub ranker: String,
    pub source_table: String,
    pub candidate_tables: Vec<String>,
    pub attributes: Vec<String>,
    pub prompt_hash: String,
    pub prompt_chars: usize,
    pub response: Option<String>,
    pub error: Option<String>,
}

/// Append-only JSONL log of ranker calls.
pub struct TranscriptLog {
    file: Mutex<File>,
}

impl TranscriptLog {
    pub fn open(path: impl AsRef<Path>) -> std::io::Result<Self> {
        let path = path.as_ref();
        if let Some(parent) = path.parent() {
            std::fs::create_dir_all(parent)?;
        }
        let file = OpenOptions::new().create(true).append(true).open(path)?;
        Ok(Self { file: Mutex::new(file) })
    }

    pub fn append(&self, record: &TranscriptRecord) -> std::io::Result<()> {
        let mut line = serde_json::to_string(record).map_err(std::io::Error::other)?;
        line.push('\n');
        let mut f = self.file.lock().expect("transcript lock");
        f.write_all(line.as_bytes())?;
        f.flush()
    }

    pub fn record(
        &self,
        ranker: &dyn Ranker,
        prompt: &MatchPrompt,
        outcome: &Result<String, RankError>,
    ) -> std::io::Result<()> {
        self.append(&TranscriptRecord {
            timestamp: chrono::Utc::now().to_rfc3339(),
            ranker: ranker.id(),
            source_table: prompt.source_table.clone(),
            candidate_tables: prompt.candidate_tables.clone(),
            attributes: prompt.source_attributes.clone(),
            prompt_hash: prompt.hash(),
            prompt_chars: prompt.char_len(),
            response: outcome.as_ref().ok().cloned(),
            error: outcome.as_ref().err().map(ToString::to_string),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::docgen::build_corpora;
    use crate::embed::HashTrigramEmbedder;
    use crate::http::{testserver, RetryPolicy};
    use crate::rank::{build_match_prompt, parse_topk_response, PromptInputs, Target};
    use crate::schema::AttrRef;

    fn fixtures() -> (Schema, Schema) {
        let s = Schema::from_json_str(include_str!("../../fixtures/admissions_source.json"), "src").unwrap();
        let t = Schema::from_json_str(include_str!("../../fixtures/admissions_target.json"), "tgt").unwrap();
        (s, t)
    }

    fn prompt_for(s: &Schema, t: &Schema, candidates: &[String], k: usize) -> MatchPrompt {
        let (cs, ct) = build_corpora(s, t, DocMode::Full);
        let attrs: Vec<String> = s.tables[0].attributes.iter().map(|a| a.name.clone()).collect();
        build_match_prompt(&PromptInputs {
            source_table: &s.tables[0],
            source_docs: &cs,
            attributes: &attrs,
            target: t,
            target_docs: &ct,
            candidate_tables: candidates,
            k,
            guidance: &[],
        })
        .unwrap()
    }

    #[test]
    fn oracle_output_parses_and_pads_with_single_na() {
        let (s, t) = fixtures();
        let candidates = vec!["PERSON".to_string()];
        let prompt = prompt_for(&s, &t, &candidates, 4);
        let oracle = LocalOracleRanker::<f64>::new(Arc::new(HashTrigramEmbedder::new(256)));
        let raw = oracle
            .rank(&RankRequest {
                prompt: &prompt,
                source: &s,
                target: &t,
                mode: DocMode::Full,
            })
            .unwrap();
        let expected: Vec<AttrRef> = s.tables[0]
            .attributes
            .iter()
            .map(|a| AttrRef::new("ADMISSIONS", &a.name))
            .collect();
        let person = t.table("PERSON").unwrap();
        let parsed = parse_topk_response(&raw, &expected, 4, &[person]).unwrap();
        assert!(parsed.diagnostics.is_empty(), "{:?}", parsed.diagnostics);
        for row in &parsed.rows {
            assert!(matches!(row.targets[0], Target::Attribute(_)));
            assert!(matches!(row.targets[1], Target::Attribute(_)));
            assert_eq!(row.targets[2], Target::Na);
            assert_eq!(row.targets[3], Target::Empty);
        }
    }

    #[test]
    fn oracle_ranks_identical_document_first() {
        let (_, t) = fixtures();
        let mut s = t.clone();
        s.name = "copy".into();
        s.tables.truncate(1);
        let candidates = vec!["PERSON".to_string(), "VISIT_OCCURRENCE".to_string()];
        let prompt = prompt_for(&s, &t, &candidates, 1);
        let oracle = LocalOracleRanker::<f64>::new(Arc::new(HashTrigramEmbedder::new(1024)));
        let raw = oracle
            .rank(&RankRequest {
                prompt: &prompt,
                source: &s,
                target: &t,
                mode: DocMode::Full,
            })
            .unwrap();
        let expected: Vec<AttrRef> = s.tables[0]
            .attributes
            .iter()
            .map(|a| AttrRef::new("PERSON", &a.name))
            .collect();
        let cands: Vec<&crate::schema::Table> = candidates.iter().map(|c| t.table(c).unwrap()).collect();
        let parsed = parse_topk_response(&raw, &expected, 1, &cands).unwrap();
        for row in &parsed.rows {
            assert_eq!(row.targets, vec![Target::attribute("PERSON", &row.src_attr)]);
        }
    }

    #[test]
    fn remote_wire_format() {
        let (s, t) = fixtures();
        let prompt = prompt_for(&s, &t, &["PERSON".to_string()], 2);
        let (base, rx) = testserver::serve(vec![(
            200,
            r#"{"choices":[{"message":{"role":"assistant","content":"{'1': {}}"}}]}"#.into(),
        )]);
        let ranker = RemoteRanker::new(&base, "gpt-x", GenerationParams::default(), Some("sk-test".into()));
        let out = ranker
            .rank(&RankRequest {
                prompt: &prompt,
                source: &s,
                target: &t,
                mode: DocMode::Full,
            })
            .unwrap();
        assert_eq!(out, "{'1': {}}");
        let req = rx.recv().unwrap();
        assert!(req.request_line.starts_with("POST /chat/completions "));
        assert!(req
            .headers
            .iter()
            .any(|h| h.eq_ignore_ascii_case("authorization: Bearer sk-test")));
        let body: serde_json::Value = serde_json::from_str(&req.body).unwrap();
        assert_eq!(body["model"], "gpt-x");
        assert_eq!(body["seed"], 42);
        assert_eq!(body["temperature"], 0.5);
        assert_eq!(body["top_p"], 0.9);
        assert_eq!(body["max_tokens"], 4096);
        assert_eq!(body["messages"][0]["role"], "system");
        assert_eq!(body["messages"][0]["content"], prompt.system_text);
        assert_eq!(body["messages"][1]["content"], prompt.user_text);
    }

    #[test]
    fn remote_errors_surface() {
        let (s, t) = fixtures();
        let prompt = prompt_for(&s, &t, &["PERSON".to_string()], 1);
        let (base, _rx) = testserver::serve(vec![(401, r#"{"error":"bad key"}"#.into())]);
        let ranker = RemoteRanker::new(&base, "m", GenerationParams::default(), None).with_retry(RetryPolicy::none());
        let err = ranker
            .rank(&RankRequest {
                prompt: &prompt,
                source: &s,
                target: &t,
                mode: DocMode::Full,
            })
            .unwrap_err();
        assert!(
            matches!(err, RankError::Remote(RemoteError { status: Some(401), .. })),
            "{err:?}"
        );
    }

    #[test]
    fn spec_serde_and_defaults() {
        let spec: RankerSpec = serde_json::from_str(r#"{"kind":"remote-llm","model":"m"}"#).unwrap();
        match spec {
            RankerSpec::RemoteLlm { params, .. } => assert_eq!(params, GenerationParams::default()),
            other => panic!("{other:?}"),
        }
        let json = serde_json::to_value(RankerSpec::default()).unwrap();
        assert_eq!(json, serde_json::json!({"kind": "local-similarity-oracle"}));
    }

    #[test]
    fn transcript_is_jsonl() {
        let (s, t) = fixtures();
        let prompt = prompt_for(&s, &t, &["PERSON".to_string()], 1);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t/transcript.jsonl");
        let log = TranscriptLog::open(&path).unwrap();
        let oracle = LocalOracleRanker::<f64>::new(Arc::new(HashTrigramEmbedder::new(64)));
        log.record(&oracle, &prompt, &Ok("r1".into())).unwrap();
        log.record(&oracle, &prompt, &Err(RankError::InvalidK)).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        let records: Vec<TranscriptRecord> = text.lines().map(|l| serde_json::from_str(l).unwrap()).collect();
        assert_eq!(records.len(), 2);
        assert_eq!(records[0].response.as_deref(), Some("r1"));
        assert_eq!(records[0].prompt_hash, prompt.hash());
        assert!(records[1].error.is_some());
    }
}
