//! Helpers shared by the service integration tests.
#![allow(dead_code)]

use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Arc, Condvar, Mutex};
use std::time::{Duration, Instant};

use serde_json::Value;

use rematch_core::embed::{Embedder, HashTrigramEmbedder};
use rematch_core::http::RemoteError;
use rematch_core::pipeline::{Backends, PipelineConfig, PipelineError};
use rematch_core::rank::{LocalOracleRanker, RankError, RankRequest, Ranker};
use rematch_service::api::{router, AppState, ServiceOptions};
use rematch_service::jobs::{default_backend_factory, BackendFactory};

pub fn planted_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../core/fixtures/planted")
}

pub fn planted(file: &str) -> PathBuf {
    planted_dir().join(file)
}

pub fn read(path: &Path) -> String {
    std::fs::read_to_string(path).unwrap_or_else(|e| panic!("{}: {e}", path.display()))
}

/// An in-process server on an ephemeral port, alive until the test
/// process exits.
pub fn start_server(data_dir: &Path, backends: BackendFactory, max_jobs: usize) -> Http {
    let options = ServiceOptions {
        data_dir: data_dir.to_path_buf(),
        max_active_jobs_per_project: max_jobs,
        backends,
    };
    let (tx, rx) = std::sync::mpsc::channel();
    std::thread::spawn(move || {
        let rt = tokio::runtime::Runtime::new().unwrap();
        rt.block_on(async move {
            let state = AppState::open(options).unwrap();
            let listener = tokio::net::TcpListener::bind("127.0.0.1:0").await.unwrap();
            tx.send(listener.local_addr().unwrap()).unwrap();
            axum::serve(listener, router(state)).await.unwrap();
        });
    });
    Http::new(&format!("http://{}", rx.recv().unwrap()))
}

pub fn start_default_server(data_dir: &Path) -> Http {
    start_server(data_dir, default_backend_factory(), 1)
}

pub struct Http {
    agent: ureq::Agent,
    pub base: String,
}

pub struct Reply {
    pub status: u16,
    pub content_type: String,
    pub body: String,
}

impl Reply {
    pub fn json(&self) -> Value {
        serde_json::from_str(&self.body).unwrap_or_else(|e| panic!("{e}: {}", self.body))
    }
}

impl Http {
    pub fn new(base: &str) -> Self {
        let agent: ureq::Agent = ureq::Agent::config_builder().http_status_as_error(false).build().into();
        Self {
            agent,
            base: base.trim_end_matches('/').to_string(),
        }
    }

    fn url(&self, path: &str) -> String {
        format!("{}/api/v1{path}", self.base)
    }

    fn reply(r: Result<ureq::http::Response<ureq::Body>, ureq::Error>) -> Reply {
        let mut r = r.expect("request reaches the server");
        let content_type = r
            .headers()
            .get("content-type")
            .and_then(|v| v.to_str().ok())
            .unwrap_or_default()
            .to_string();
        Reply {
            status: r.status().as_u16(),
            content_type,
            body: r.body_mut().read_to_string().unwrap(),
        }
    }

    pub fn get(&self, path: &str) -> Reply {
        Self::reply(self.agent.get(&self.url(path)).call())
    }

    pub fn post(&self, path: &str, body: &str) -> Reply {
        Self::reply(
            self.agent
                .post(&self.url(path))
                .header("content-type", "application/json")
                .send(body),
        )
    }

    pub fn delete(&self, path: &str, body: &str) -> Reply {
        Self::reply(
            self.agent
                .delete(&self.url(path))
                .header("content-type", "application/json")
                .force_send_body()
                .send(body),
        )
    }

    /// Creates a project from the planted fixture and returns its id.
    pub fn create_planted_project(&self) -> String {
        let body = serde_json::json!({
            "name": "planted",
            "source": serde_json::from_str::<Value>(&read(&planted("source.json"))).unwrap(),
            "target": serde_json::from_str::<Value>(&read(&planted("target.json"))).unwrap(),
            "truth": read(&planted("truth.csv")),
        });
        let r = self.post("/projects", &body.to_string());
        assert_eq!(r.status, 201, "{}", r.body);
        r.json()["id"].as_str().unwrap().to_string()
    }

    /// Polls a run until it leaves the queued and running states.
    pub fn wait_for_run(&self, job: &str) -> Value {
        let deadline = Instant::now() + Duration::from_secs(60);
        loop {
            let r = self.get(&format!("/runs/{job}"));
            assert_eq!(r.status, 200, "{}", r.body);
            let v = r.json();
            if !matches!(v["state"].as_str(), Some("queued" | "running")) {
                return v;
            }
            assert!(Instant::now() < deadline, "run {job} did not finish");
            std::thread::sleep(Duration::from_millis(20));
        }
    }

    pub fn start_run(&self, project: &str, config: &str) -> String {
        let r = self.post(&format!("/projects/{project}/runs"), config);
        assert_eq!(r.status, 202, "{}", r.body);
        r.json()["id"].as_str().unwrap().to_string()
    }
}

pub fn hash_embedder() -> Arc<dyn Embedder<f64>> {
    Arc::new(HashTrigramEmbedder::new(1024))
}

pub fn injected(message: &str) -> RankError {
    RankError::Remote(RemoteError {
        url: "test://ranker".into(),
        message: message.into(),
        status: Some(503),
        retry_after_secs: None,
        attempts: 1,
    })
}

/// Oracle ranker with test controls: an optional gate that blocks calls
/// until opened, a source table whose calls fail, and per-table call counts.
pub struct ControlledRanker {
    inner: LocalOracleRanker<f64>,
    gate: Arc<(Mutex<bool>, Condvar)>,
    pub fail_table: Mutex<Option<String>>,
    pub calls: Mutex<Vec<String>>,
    pub in_flight: AtomicUsize,
}

impl ControlledRanker {
    pub fn new(open: bool) -> Arc<Self> {
        Arc::new(Self {
            inner: LocalOracleRanker::new(hash_embedder()),
            gate: Arc::new((Mutex::new(open), Condvar::new())),
            fail_table: Mutex::new(None),
            calls: Mutex::new(Vec::new()),
            in_flight: AtomicUsize::new(0),
        })
    }

    pub fn open_gate(&self) {
        let (lock, cv) = &*self.gate;
        *lock.lock().unwrap() = true;
        cv.notify_all();
    }

    pub fn calls_for(&self, table: &str) -> usize {
        self.calls.lock().unwrap().iter().filter(|t| *t == table).count()
    }

    pub fn factory(self: &Arc<Self>) -> BackendFactory {
        let me = Arc::clone(self);
        Arc::new(move |_: &PipelineConfig| -> Result<Backends<f64>, PipelineError> {
            Ok(Backends::new(hash_embedder(), me.clone()))
        })
    }
}

impl Ranker for ControlledRanker {
    fn id(&self) -> String {
        "controlled".into()
    }

    fn rank(&self, req: &RankRequest<'_>) -> Result<String, RankError> {
        self.in_flight.fetch_add(1, Ordering::SeqCst);
        let (lock, cv) = &*self.gate;
        let _open = cv.wait_while(lock.lock().unwrap(), |open| !*open).unwrap();
        drop(_open);
        self.in_flight.fetch_sub(1, Ordering::SeqCst);
        let table = req.prompt.source_table.clone();
        self.calls.lock().unwrap().push(table.clone());
        if self.fail_table.lock().unwrap().as_deref() == Some(table.as_str()) {
            return Err(injected("injected ranker outage"));
        }
        self.inner.rank(req)
    }
}

/// Path of the built `rematch` binary.
pub fn rematch_bin() -> &'static str {
    env!("CARGO_BIN_EXE_rematch")
}

pub fn run_cli(args: &[&str]) -> std::process::Output {
    std::process::Command::new(rematch_bin())
        .args(args)
        .env_remove("REMATCH_API_KEY")
        .env_remove("REMATCH_CACHE_DIR")
        .output()
        .expect("rematch runs")
}
