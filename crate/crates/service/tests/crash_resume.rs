//! Kills a real `rematch serve` process in the middle of a run and resumes
//! the run after a restart.

mod common;

use std::io::{BufRead, BufReader, Read, Write};
use std::net::{TcpListener, TcpStream};
use std::path::Path;
use std::process::{Child, Command, Stdio};
use std::sync::atomic::{AtomicBool, AtomicUsize, Ordering};
use std::sync::Arc;
use std::time::{Duration, Instant};

use common::*;

/// A chat-completions endpoint that answers every request with text the
/// parser cannot use, and stops answering at a chosen request.
struct StubModel {
    url: String,
    requests: Arc<AtomicUsize>,
    hang_at: Arc<AtomicUsize>,
    released: Arc<AtomicBool>,
}

impl StubModel {
    fn start(hang_at: usize) -> Self {
        let listener = TcpListener::bind("127.0.0.1:0").unwrap();
        let url = format!("http://{}/v1", listener.local_addr().unwrap());
        let stub = StubModel {
            url,
            requests: Arc::new(AtomicUsize::new(0)),
            hang_at: Arc::new(AtomicUsize::new(hang_at)),
            released: Arc::new(AtomicBool::new(false)),
        };
        let (requests, hang, released) = (stub.requests.clone(), stub.hang_at.clone(), stub.released.clone());
        std::thread::spawn(move || {
            for conn in listener.incoming() {
                let Ok(conn) = conn else { continue };
                let (requests, hang, released) = (requests.clone(), hang.clone(), released.clone());
                std::thread::spawn(move || serve_connection(conn, &requests, &hang, &released));
            }
        });
        stub
    }

    fn count(&self) -> usize {
        self.requests.load(Ordering::SeqCst)
    }

    /// Answers from now on and counts from zero.
    fn recover(&self) {
        self.hang_at.store(usize::MAX, Ordering::SeqCst);
        self.released.store(true, Ordering::SeqCst);
        self.requests.store(0, Ordering::SeqCst);
    }
}

fn serve_connection(conn: TcpStream, requests: &AtomicUsize, hang_at: &AtomicUsize, released: &AtomicBool) {
    let mut writer = conn.try_clone().unwrap();
    let mut reader = BufReader::new(conn);
    loop {
        let mut length = 0usize;
        let mut line = String::new();
        if reader.read_line(&mut line).unwrap_or(0) == 0 {
            return;
        }
        loop {
            line.clear();
            if reader.read_line(&mut line).unwrap_or(0) == 0 {
                return;
            }
            let header = line.trim_end();
            if header.is_empty() {
                break;
            }
            if let Some((name, value)) = header.split_once(':') {
                if name.eq_ignore_ascii_case("content-length") {
                    length = value.trim().parse().unwrap();
                }
            }
        }
        let mut body = vec![0u8; length];
        if reader.read_exact(&mut body).is_err() {
            return;
        }
        let n = requests.fetch_add(1, Ordering::SeqCst) + 1;
        if n == hang_at.load(Ordering::SeqCst) {
            while !released.load(Ordering::SeqCst) {
                std::thread::sleep(Duration::from_millis(10));
            }
            return;
        }
        let payload = r#"{"choices":[{"message":{"role":"assistant","content":"I am not sure."}}]}"#;
        let response = format!(
            "HTTP/1.1 200 OK\r\nContent-Type: application/json\r\nContent-Length: {}\r\n\r\n{payload}",
            payload.len()
        );
        if writer.write_all(response.as_bytes()).is_err() {
            return;
        }
    }
}

/// A `rematch serve` child process, killed when dropped.
struct Service {
    child: Child,
    http: Http,
}

impl Service {
    fn start(data_dir: &Path) -> Self {
        let mut child = Command::new(rematch_bin())
            .args([
                "serve",
                "--bind",
                "127.0.0.1:0",
                "--data-dir",
                data_dir.to_str().unwrap(),
            ])
            .env_remove("REMATCH_API_KEY")
            .env_remove("REMATCH_API_BASE")
            .stdout(Stdio::piped())
            .stderr(Stdio::null())
            .spawn()
            .expect("rematch serve starts");
        let mut line = String::new();
        BufReader::new(child.stdout.take().unwrap())
            .read_line(&mut line)
            .unwrap();
        let base = line
            .trim()
            .strip_prefix("listening on ")
            .unwrap_or_else(|| panic!("{line:?}"))
            .to_string();
        Service {
            child,
            http: Http::new(&base),
        }
    }

    fn kill(mut self) {
        self.child.kill().unwrap();
        self.child.wait().unwrap();
    }
}

impl Drop for Service {
    fn drop(&mut self) {
        let _ = self.child.kill();
        let _ = self.child.wait();
    }
}

fn wait_until(what: &str, mut done: impl FnMut() -> bool) {
    let deadline = Instant::now() + Duration::from_secs(30);
    while !done() {
        assert!(Instant::now() < deadline, "timed out waiting for {what}");
        std::thread::sleep(Duration::from_millis(20));
    }
}

#[test]
fn killed_service_leaves_a_resumable_partial_run() {
    // Each table costs two calls: the unusable answer and one re-ask. The
    // third call is the first call for the second table.
    let stub = StubModel::start(3);
    let data = tempfile::tempdir().unwrap();
    let config = serde_json::json!({
        "j": 3,
        "k": 3,
        "parallelism": 1,
        "ranker": {"kind": "remote-llm", "base_url": stub.url, "model": "stub"},
    });

    let service = Service::start(data.path());
    let project = service.http.create_planted_project();
    let job = service.http.start_run(&project, &config.to_string());
    wait_until("the hanging request", || stub.count() == 3);
    let running = service.http.get(&format!("/runs/{job}")).json();
    assert_eq!(running["state"], "running");
    assert_eq!(running["completed_tables"], 1);
    service.kill();

    let service = Service::start(data.path());
    let after = service.http.get(&format!("/runs/{job}")).json();
    assert_eq!(after["state"], "partial", "{after}");
    assert_eq!(after["completed_tables"], 1);
    assert_eq!(after["total_tables"], 4);
    assert!(after["error"].as_str().unwrap().contains("interrupted"));
    assert_eq!(service.http.get(&format!("/runs/{job}/eval")).status, 502);

    stub.recover();
    let resumed = service.http.post(&format!("/runs/{job}/resume"), "");
    assert_eq!(resumed.status, 202, "{}", resumed.body);
    let done = service.http.wait_for_run(&job);
    assert_eq!(done["state"], "done", "{done}");
    assert_eq!(stub.count(), 3 * 2, "only the three unfinished tables are asked");

    let rows = done["result"]["rows"].as_array().unwrap();
    assert_eq!(rows.len(), 16);
    assert!(rows.iter().all(|r| r["unresolved"] == true));
    let eval = service.http.get(&format!("/runs/{job}/eval?k=1")).json();
    assert_eq!(eval["accuracy_at_k"]["1"], 0.0);

    // A clean restart keeps finished runs as they are.
    service.kill();
    let service = Service::start(data.path());
    assert_eq!(service.http.get(&format!("/runs/{job}")).json()["state"], "done");
}
