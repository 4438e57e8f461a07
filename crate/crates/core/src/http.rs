//! Blocking JSON-over-HTTP client shared by the remote embedder and ranker.

use std::path::PathBuf;
use std::time::Duration;

use serde::Serialize;
use thiserror::Error;

pub const ENV_API_KEY: &str = "REMATCH_API_KEY";
pub const ENV_API_BASE: &str = "REMATCH_API_BASE";
pub const ENV_EMBED_MODEL: &str = "REMATCH_EMBED_MODEL";
pub const ENV_GEN_MODEL: &str = "REMATCH_GEN_MODEL";
pub const ENV_CACHE_DIR: &str = "REMATCH_CACHE_DIR";

/// Provider settings read from the environment. Secrets live only here and
/// are never written into manifests.
#[derive(Clone, Default)]
pub struct ApiEnv {
    pub base_url: Option<String>,
    pub api_key: Option<String>,
    pub embed_model: Option<String>,
    pub gen_model: Option<String>,
    pub cache_dir: Option<PathBuf>,
}

impl std::fmt::Debug for ApiEnv {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ApiEnv")
            .field("base_url", &self.base_url)
            .field("api_key", &self.api_key.as_ref().map(|_| "<redacted>"))
            .field("embed_model", &self.embed_model)
            .field("gen_model", &self.gen_model)
            .field("cache_dir", &self.cache_dir)
            .finish()
    }
}

impl ApiEnv {
    pub fn from_env() -> Self {
        let var = |k: &str| std::env::var(k).ok().filter(|v| !v.trim().is_empty());
        Self {
            base_url: var(ENV_API_BASE),
            api_key: var(ENV_API_KEY),
            embed_model: var(ENV_EMBED_MODEL),
            gen_model: var(ENV_GEN_MODEL),
            cache_dir: var(ENV_CACHE_DIR).map(PathBuf::from),
        }
    }
}

/// A failed remote call, with enough metadata for the caller to back off.
#[derive(Debug, Clone, Error, Serialize, PartialEq)]
#[error("remote call to {url} failed after {attempts} attempt(s): {message}")]
pub struct RemoteError {
    pub url: String,
    pub message: String,
    pub status: Option<u16>,
    pub retry_after_secs: Option<f64>,
    pub attempts: u32,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RetryPolicy {
    pub max_retries: u32,
    pub base_delay: Duration,
    pub max_delay: Duration,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        Self {
            max_retries: 3,
            base_delay: Duration::from_millis(500),
            max_delay: Duration::from_secs(20),
        }
    }
}

impl RetryPolicy {
    pub fn none() -> Self {
        Self {
            max_retries: 0,
            ..Self::default()
        }
    }

    fn delay(&self, attempt: u32, retry_after: Option<f64>) -> Duration {
        let backoff = self.base_delay.saturating_mul(1u32 << attempt.min(16));
        retry_after
            .map(Duration::from_secs_f64)
            .unwrap_or(backoff)
            .min(self.max_delay)
    }
}

pub(crate) fn join_url(base: &str, path: &str) -> String {
    format!("{}/{}", base.trim_end_matches('/'), path.trim_start_matches('/'))
}

#[derive(Debug, Clone)]
pub struct JsonClient {
    agent: ureq::Agent,
    api_key: Option<String>,
    retry: RetryPolicy,
}

impl JsonClient {
    pub fn new(api_key: Option<String>, timeout: Duration) -> Self {
        let agent: ureq::Agent = ureq::Agent::config_builder()
            .http_status_as_error(false)
            .timeout_global(Some(timeout))
            .build()
            .into();
        Self {
            agent,
            api_key,
            retry: RetryPolicy::default(),
        }
    }

    pub fn with_retry(mut self, retry: RetryPolicy) -> Self {
        self.retry = retry;
        self
    }

    /// POSTs a JSON body, retrying transport failures, 429 and 5xx.
    pub fn post_json<B: Serialize>(&self, url: &str, body: &B) -> Result<serde_json::Value, RemoteError> {
        let payload = serde_json::to_vec(body).map_err(|e| RemoteError {
            url: url.to_string(),
            message: format!("request body: {e}"),
            status: None,
            retry_after_secs: None,
            attempts: 0,
        })?;
        let mut attempt = 0u32;
        loop {
            attempt += 1;
            let fail = |message: String, status: Option<u16>, retry_after_secs: Option<f64>| RemoteError {
                url: url.to_string(),
                message,
                status,
                retry_after_secs,
                attempts: attempt,
            };
            let mut req = self.agent.post(url).header("Content-Type", "application/json");
            if let Some(key) = &self.api_key {
                req = req.header("Authorization", &format!("Bearer {key}"));
            }
            let err = match req.send(&payload[..]) {
                Err(e) => fail(e.to_string(), None, None),
                Ok(mut resp) => {
                    let status = resp.status().as_u16();
                    let retry_after = resp
                        .headers()
                        .get("retry-after")
                        .and_then(|v| v.to_str().ok())
                        .and_then(|v| v.trim().parse::<f64>().ok());
                    let text = resp.body_mut().read_to_string().unwrap_or_default();
                    if (200..300).contains(&status) {
                        return serde_json::from_str(&text)
                            .map_err(|e| fail(format!("invalid JSON response: {e}"), Some(status), None));
                    }
                    let e = fail(
                        format!("HTTP {status}: {}", truncate(&text, 500)),
                        Some(status),
                        retry_after,
                    );
                    if status != 429 && status < 500 {
                        return Err(e);
                    }
                    e
                }
            };
            if attempt > self.retry.max_retries {
                return Err(err);
            }
            let wait = self.retry.delay(attempt - 1, err.retry_after_secs);
            tracing::warn!(url, attempt, ?wait, "retrying: {}", err.message);
            std::thread::sleep(wait);
        }
    }
}

fn truncate(s: &str, max: usize) -> &str {
    match s.char_indices().nth(max) {
        Some((i, _)) => &s[..i],
        None => s,
    }
}
