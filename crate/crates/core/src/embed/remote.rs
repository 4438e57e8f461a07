use std::time::Duration;

use serde::Deserialize;

use super::{EmbedError, Embedder, EmbeddingVector};
use crate::http::{join_url, JsonClient, RemoteError, RetryPolicy};
use crate::scalar::Real;

#[derive(Deserialize)]
struct EmbeddingsResponse {
    data: Vec<EmbeddingItem>,
}

#[derive(Deserialize)]
struct EmbeddingItem {
    index: usize,
    embedding: Vec<f64>,
}

/// Client for an `/embeddings` endpoint taking `{model, input: [texts]}`.
#[derive(Debug, Clone)]
pub struct RemoteEmbedder {
    url: String,
    model: String,
    dim: usize,
    client: JsonClient,
    batch_size: usize,
    max_in_flight: usize,
}

impl RemoteEmbedder {
    pub fn new(base_url: impl AsRef<str>, model: impl Into<String>, dim: usize, api_key: Option<String>) -> Self {
        Self {
            url: join_url(base_url.as_ref(), "embeddings"),
            model: model.into(),
            dim,
            client: JsonClient::new(api_key, Duration::from_secs(120)),
            batch_size: 64,
            max_in_flight: 8,
        }
    }

    pub fn with_retry(mut self, retry: RetryPolicy) -> Self {
        self.client = self.client.with_retry(retry);
        self
    }

    pub fn with_batch_size(mut self, n: usize) -> Self {
        self.batch_size = n.max(1);
        self
    }

    pub fn with_max_in_flight(mut self, n: usize) -> Self {
        self.max_in_flight = n.max(1);
        self
    }

    fn request<F: Real>(&self, texts: &[String]) -> Result<Vec<EmbeddingVector<F>>, EmbedError> {
        let body = serde_json::json!({ "model": self.model, "input": texts });
        let value = self.client.post_json(&self.url, &body)?;
        let malformed = |message: String| {
            EmbedError::Remote(RemoteError {
                url: self.url.clone(),
                message,
                status: Some(200),
                retry_after_secs: None,
                attempts: 1,
            })
        };
        let parsed: EmbeddingsResponse =
            serde_json::from_value(value).map_err(|e| malformed(format!("unexpected response shape: {e}")))?;
        let mut slots: Vec<Option<Vec<f64>>> = vec![None; texts.len()];
        for item in parsed.data {
            let slot = slots
                .get_mut(item.index)
                .ok_or_else(|| malformed(format!("response index {} out of range", item.index)))?;
            *slot = Some(item.embedding);
        }
        slots
            .into_iter()
            .zip(texts)
            .enumerate()
            .map(|(i, (slot, text))| {
                let values = slot.ok_or_else(|| malformed(format!("no embedding for input {i}")))?;
                if values.len() != self.dim {
                    return Err(EmbedError::DimensionMismatch {
                        expected: self.dim,
                        got: values.len(),
                    });
                }
                if text.is_empty() {
                    return Ok(EmbeddingVector::empty_text(self.dim, &self.model));
                }
                EmbeddingVector::new(values.into_iter().map(F::from_f64_lossy).collect(), &self.model)
                    .map(|v| v.normalized())
            })
            .collect()
    }
}

impl<F: Real> Embedder<F> for RemoteEmbedder {
    fn model_id(&self) -> &str {
        &self.model
    }

    fn dim(&self) -> usize {
        self.dim
    }

    /// Sends batches of `batch_size`, at most `max_in_flight` at a time.
    fn embed_batch(&self, texts: &[String]) -> Result<Vec<EmbeddingVector<F>>, EmbedError> {
        let batches: Vec<&[String]> = texts.chunks(self.batch_size).collect();
        let mut out = Vec::with_capacity(texts.len());
        for wave in batches.chunks(self.max_in_flight) {
            let results: Vec<Result<Vec<EmbeddingVector<F>>, EmbedError>> = std::thread::scope(|scope| {
                let handles: Vec<_> = wave.iter().map(|b| scope.spawn(|| self.request::<F>(b))).collect();
                handles
                    .into_iter()
                    .map(|h| h.join().expect("embedding worker panicked"))
                    .collect()
            });
            for r in results {
                out.extend(r?);
            }
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::http::testserver;

    #[test]
    fn wire_format_and_index_reordering() {
        let (base, rx) = testserver::serve(vec![(
            200,
            r#"{"data":[{"index":1,"embedding":[0.0,2.0]},{"index":0,"embedding":[3.0,4.0]}]}"#.into(),
        )]);
        let e = RemoteEmbedder::new(&base, "ada-2", 2, Some("k".into()));
        let v: Vec<EmbeddingVector<f64>> = e.embed_batch(&["a".into(), "b".into()]).unwrap();
        assert_eq!(v[0].values(), &[0.6, 0.8]);
        assert_eq!(v[1].values(), &[0.0, 1.0]);
        assert_eq!(v[0].model_id(), "ada-2");
        let req = rx.recv().unwrap();
        assert!(req.request_line.starts_with("POST /embeddings "));
        let body: serde_json::Value = serde_json::from_str(&req.body).unwrap();
        assert_eq!(body, serde_json::json!({"model": "ada-2", "input": ["a", "b"]}));
    }

    #[test]
    fn wrong_dimension_is_rejected() {
        let (base, _rx) = testserver::serve(vec![(200, r#"{"data":[{"index":0,"embedding":[1.0]}]}"#.into())]);
        let e = RemoteEmbedder::new(&base, "m", 3, None);
        let err = Embedder::<f64>::embed_text(&e, "x").unwrap_err();
        assert!(matches!(err, EmbedError::DimensionMismatch { expected: 3, got: 1 }));
    }

    #[test]
    fn batches_split_and_preserve_order() {
        let (base, _rx) = testserver::serve(vec![
            (200, r#"{"data":[{"index":0,"embedding":[1.0,0.0]}]}"#.into()),
            (200, r#"{"data":[{"index":0,"embedding":[0.0,1.0]}]}"#.into()),
        ]);
        let e = RemoteEmbedder::new(&base, "m", 2, None)
            .with_batch_size(1)
            .with_max_in_flight(1);
        let v: Vec<EmbeddingVector<f64>> = e.embed_batch(&["a".into(), "b".into()]).unwrap();
        assert_eq!(v[0].values(), &[1.0, 0.0]);
        assert_eq!(v[1].values(), &[0.0, 1.0]);
    }

    #[test]
    fn unreachable_endpoint_is_remote_error() {
        let e = RemoteEmbedder::new("http://127.0.0.1:1", "m", 2, None).with_retry(RetryPolicy::none());
        assert!(matches!(
            Embedder::<f64>::embed_text(&e, "x"),
            Err(EmbedError::Remote(_))
        ));
    }
}
