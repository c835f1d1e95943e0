#![allow(dead_code)]

use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::thread::JoinHandle;
use std::time::Duration;

use chrono::{DateTime, TimeZone, Utc};
use flowd::{ApiConfig, Server};
use serde_json::Value as Json;
use tokio::sync::oneshot;

pub fn fixtures() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../fixtures")
}

pub fn epoch() -> DateTime<Utc> {
    Utc.with_ymd_and_hms(2024, 5, 1, 12, 0, 0).unwrap()
}

pub fn copy_dir(from: &Path, to: &Path) {
    fs::create_dir_all(to).unwrap();
    for entry in fs::read_dir(from).unwrap() {
        let path = entry.unwrap().path();
        let target = to.join(path.file_name().unwrap());
        if path.is_dir() {
            copy_dir(&path, &target);
        } else {
            fs::copy(&path, &target).unwrap();
        }
    }
}

/// A writable copy of the potluck repository, optionally with the welcome
/// domain and flow added.
pub fn potluck_repo(dir: &Path, with_welcome: bool) -> PathBuf {
    let repo = dir.join("repo");
    copy_dir(&fixtures().join("potluck"), &repo);
    if with_welcome {
        copy_dir(&fixtures().join("welcome"), &repo);
    }
    repo
}

pub fn config(repo: &Path, data: &Path) -> ApiConfig {
    ApiConfig {
        bind_address: "127.0.0.1:0".parse().unwrap(),
        fixed_clock: Some(epoch()),
        ..ApiConfig::new(repo, data)
    }
}

/// An in-process server on an ephemeral port; stops when dropped.
pub struct TestServer {
    pub base: String,
    pub server: Arc<Server>,
    shutdown: Option<oneshot::Sender<()>>,
    thread: Option<JoinHandle<()>>,
}

impl TestServer {
    pub fn start(config: &ApiConfig) -> Self {
        let server = Arc::new(Server::open(config).unwrap());
        let (addr_tx, addr_rx) = std::sync::mpsc::channel();
        let (stop_tx, stop_rx) = oneshot::channel::<()>();
        let shared = server.clone();
        let bind = config.bind_address;
        let thread = std::thread::spawn(move || {
            let runtime = tokio::runtime::Runtime::new().unwrap();
            runtime.block_on(async move {
                let listener = tokio::net::TcpListener::bind(bind).await.unwrap();
                addr_tx.send(listener.local_addr().unwrap()).unwrap();
                flowd::serve(shared, listener, async {
                    let _ = stop_rx.await;
                })
                .await
                .unwrap();
            });
        });
        let addr = addr_rx.recv_timeout(Duration::from_secs(5)).unwrap();
        TestServer {
            base: format!("http://{addr}"),
            server,
            shutdown: Some(stop_tx),
            thread: Some(thread),
        }
    }
}

impl Drop for TestServer {
    fn drop(&mut self) {
        if let Some(tx) = self.shutdown.take() {
            let _ = tx.send(());
        }
        if let Some(t) = self.thread.take() {
            let _ = t.join();
        }
    }
}

fn agent() -> ureq::Agent {
    let config = ureq::Agent::config_builder()
        .http_status_as_error(false)
        .timeout_global(Some(Duration::from_secs(40)))
        .build();
    ureq::Agent::new_with_config(config)
}

/// Sends a request and returns the status and JSON body.
pub fn call(method: &str, url: &str, body: Option<&str>) -> (u16, Json) {
    let agent = agent();
    let result = match (method, body) {
        ("GET", _) => agent.get(url).call(),
        ("POST", Some(b)) => agent.post(url).header("content-type", "application/json").send(b),
        ("POST", None) => agent.post(url).send_empty(),
        ("PUT", Some(b)) => agent.put(url).header("content-type", "application/json").send(b),
        _ => panic!("unsupported call {method}"),
    };
    let mut response = result.unwrap();
    let status = response.status().as_u16();
    let text = response.body_mut().read_to_string().unwrap();
    (status, serde_json::from_str(&text).unwrap_or(Json::String(text)))
}

pub fn get(url: &str) -> (u16, Json) {
    call("GET", url, None)
}

pub fn post(url: &str, body: Option<&str>) -> (u16, Json) {
    call("POST", url, body)
}

pub fn put(url: &str, body: &str) -> (u16, Json) {
    call("PUT", url, Some(body))
}

/// The potluck app document with one more launcher and the next version.
pub fn app_with_launcher(repo: &Path, launcher: Json) -> String {
    let path = repo.join("apps/potluck.app.json");
    let mut app: Json = serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap();
    app["version"] = Json::from(app["version"].as_u64().unwrap_or(1) + 1);
    app["launchers"].as_array_mut().unwrap().push(launcher);
    app.to_string()
}

pub fn survey_launcher() -> Json {
    serde_json::json!({
        "id": "survey", "label": "Survey", "flow": "review",
        "initialValues": {"review_rating": 3}
    })
}

pub fn welcome_launcher() -> Json {
    serde_json::json!({
        "id": "greeting", "label": "Welcome", "flow": "welcome",
        "initialValues": {
            "welcome_text": "Welcome to the potluck!",
            "welcome_image": "https://example.org/potluck.png"
        }
    })
}

/// Every string in `json`, keys included.
pub fn strings(json: &Json, out: &mut Vec<String>) {
    match json {
        Json::String(s) => out.push(s.clone()),
        Json::Array(items) => items.iter().for_each(|i| strings(i, out)),
        Json::Object(map) => {
            for (k, v) in map {
                out.push(k.clone());
                strings(v, out);
            }
        }
        _ => {}
    }
}

/// Names an end-user client must never see: step ids, conditions, domain
/// and service names.
pub fn internal_names(server: &Server) -> Vec<String> {
    let models = server.coordinator().models();
    let mut names = Vec::new();
    for domain in models.domains.values() {
        names.push(domain.name.clone());
        names.extend(domain.services.iter().map(|s| s.name.clone()));
    }
    for flow in models.flows.values() {
        names.extend(flow.steps.iter().map(|s| s.id.clone()));
        names.extend(flow.transitions.iter().filter_map(|t| t.condition.clone()));
    }
    names
}

pub fn leaked(body: &Json, internal: &[String]) -> Vec<String> {
    let mut all = Vec::new();
    strings(body, &mut all);
    all.into_iter().filter(|s| internal.contains(s)).collect()
}

/// Relative path → bytes of every file under `root`.
pub fn tree(root: &Path) -> std::collections::BTreeMap<PathBuf, Vec<u8>> {
    fn walk(root: &Path, dir: &Path, out: &mut std::collections::BTreeMap<PathBuf, Vec<u8>>) {
        for entry in fs::read_dir(dir).unwrap() {
            let path = entry.unwrap().path();
            if path.is_dir() {
                walk(root, &path, out);
            } else {
                out.insert(path.strip_prefix(root).unwrap().to_path_buf(), fs::read(&path).unwrap());
            }
        }
    }
    let mut out = std::collections::BTreeMap::new();
    walk(root, root, &mut out);
    out
}
