//! HTTP serving mode: the graph loads once and is shared immutably across
//! worker threads. Bad requests get a 400 with an error body; nothing a
//! client sends can take the server down.

use serde::Deserialize;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::sync::Arc;

use skillforge_core::compilation::{compile, render_packet_json};
use skillforge_core::config::SkillForgeConfig;
use skillforge_core::embedding::{Embedder, EmbeddingCache};
use skillforge_core::error::{Error, Result};
use skillforge_core::graph::PreparedGraph;
use skillforge_core::retrieval::{prepare_task, retrieve, TaskRequest};

use crate::commands::{load_index, open_json_body_limit, LoadedIndex};

const WORKERS: usize = 4;

struct ServerState {
    prepared: PreparedGraph,
    fingerprint: String,
    embedder: Box<dyn Embedder>,
    cache: Option<EmbeddingCache>,
    cfg: SkillForgeConfig,
}

#[derive(Deserialize)]
struct TaskBody {
    #[serde(default)]
    task: Option<TaskFields>,
    #[serde(default)]
    task_id: Option<String>,
    #[serde(default)]
    text: Option<String>,
}

#[derive(Deserialize)]
struct TaskFields {
    #[serde(default)]
    task_id: Option<String>,
    text: String,
}

impl TaskBody {
    fn into_request(self) -> Result<TaskRequest> {
        let (task_id, text) = match self.task {
            Some(t) => (t.task_id, t.text),
            None => (
                self.task_id,
                self.text.ok_or_else(|| Error::Config("missing task text".to_string()))?,
            ),
        };
        let id = task_id.unwrap_or_else(|| "task".to_string());
        TaskRequest::new(id, text)
    }
}

pub fn cmd_serve(index: &Path, bind: &str, cfg: &SkillForgeConfig) -> Result<()> {
    let LoadedIndex {
        prepared,
        fingerprint,
        embedder,
    } = load_index(index, cfg)?;
    let cache = match &cfg.embedding.cache_path {
        Some(path) => Some(EmbeddingCache::open(path)?),
        None => None,
    };
    let state = Arc::new(ServerState {
        prepared,
        fingerprint,
        embedder,
        cache,
        cfg: cfg.clone(),
    });

    let server = tiny_http::Server::http(bind)
        .map_err(|e| Error::Config(format!("cannot bind {bind}: {e}")))?;
    let server = Arc::new(server);
    let addr = server
        .server_addr()
        .to_ip()
        .map(|a| a.to_string())
        .unwrap_or_else(|| bind.to_string());
    // Announce the bound address on stdout so callers can discover an
    // ephemeral port.
    println!("{}", serde_json::json!({ "serving": addr, "fingerprint": state.fingerprint }));
    use std::io::Write;
    std::io::stdout().flush().ok();

    let mut workers = Vec::new();
    for _ in 0..WORKERS {
        let server = Arc::clone(&server);
        let state = Arc::clone(&state);
        workers.push(std::thread::spawn(move || loop {
            match server.recv() {
                Ok(request) => handle_safely(request, &state),
                Err(_) => return,
            }
        }));
    }
    for w in workers {
        let _ = w.join();
    }
    Ok(())
}

fn handle_safely(mut request: tiny_http::Request, state: &ServerState) {
    let mut body = String::new();
    let read_ok = open_json_body_limit(&mut request, &mut body);
    let outcome = catch_unwind(AssertUnwindSafe(|| {
        if !read_ok {
            return (400, serde_json::json!({ "error": "unreadable request body" }).to_string());
        }
        route(&request, &body, state)
    }));
    let (status, payload) = outcome.unwrap_or_else(|_| {
        (500, serde_json::json!({ "error": "internal error" }).to_string())
    });
    let response = tiny_http::Response::from_string(payload)
        .with_status_code(tiny_http::StatusCode(status))
        .with_header(
            tiny_http::Header::from_bytes(&b"Content-Type"[..], &b"application/json"[..])
                .expect("static header"),
        );
    let _ = request.respond(response);
}

fn route(request: &tiny_http::Request, body: &str, state: &ServerState) -> (u16, String) {
    let method = request.method().as_str();
    let url = request.url();
    match (method, url) {
        ("GET", "/v1/health") => (
            200,
            serde_json::json!({ "status": "ok", "fingerprint": state.fingerprint }).to_string(),
        ),
        ("POST", "/v1/retrieve") => match handle_retrieve(body, state) {
            Ok(json) => (200, json),
            Err(e) => (400, serde_json::json!({ "error": e.to_string() }).to_string()),
        },
        ("POST", "/v1/compile") => match handle_compile(body, state) {
            Ok(json) => (200, json),
            Err(e) => (400, serde_json::json!({ "error": e.to_string() }).to_string()),
        },
        _ => (404, serde_json::json!({ "error": "not found" }).to_string()),
    }
}

fn parse_task(body: &str) -> Result<TaskRequest> {
    let parsed: TaskBody = serde_json::from_str(body)?;
    parsed.into_request()
}

fn handle_retrieve(body: &str, state: &ServerState) -> Result<String> {
    let request = parse_task(body)?;
    let task = prepare_task(request, state.embedder.as_ref(), state.cache.as_ref(), &state.cfg)?;
    let result = retrieve(&task, &state.prepared, &state.cfg)?;
    Ok(serde_json::to_string_pretty(&result)?)
}

fn handle_compile(body: &str, state: &ServerState) -> Result<String> {
    let request = parse_task(body)?;
    let task = prepare_task(request, state.embedder.as_ref(), state.cache.as_ref(), &state.cfg)?;
    let result = retrieve(&task, &state.prepared, &state.cfg)?;
    let ctx = compile(&task, &result, &state.prepared, &state.cfg, None)?;
    render_packet_json(&ctx)
}
