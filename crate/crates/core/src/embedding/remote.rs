//! HTTP client for an embedding service speaking the common JSON shape:
//! request `{"model": ..., "inputs": [...]}`, response
//! `{"embeddings": [[...], ...]}`.

use serde::{Deserialize, Serialize};
use std::time::Duration;

use super::{Embedder, EmbeddingVector};
use crate::config::EmbeddingProviderConfig;
use crate::error::{Error, Result};

const MAX_ATTEMPTS: usize = 3;
const BACKOFF_BASE_MS: u64 = 100;

#[derive(Serialize)]
struct EmbedRequest<'a> {
    model: &'a str,
    inputs: &'a [String],
}

#[derive(Deserialize)]
struct EmbedResponse {
    embeddings: Vec<Vec<f32>>,
}

pub struct RemoteEmbedder {
    agent: ureq::Agent,
    endpoint_url: String,
    model_name: String,
    dim: usize,
    batch_size: usize,
}

impl RemoteEmbedder {
    pub fn new(cfg: &EmbeddingProviderConfig) -> Result<Self> {
        if cfg.dim == 0 {
            return Err(Error::ProviderConfig("dim must be > 0".to_string()));
        }
        if cfg.endpoint_url.is_empty() {
            return Err(Error::ProviderConfig("remote provider needs endpoint_url".to_string()));
        }
        let agent: ureq::Agent = ureq::Agent::config_builder()
            .timeout_global(Some(Duration::from_millis(cfg.timeout_ms)))
            .http_status_as_error(true)
            .build()
            .into();
        Ok(Self {
            agent,
            endpoint_url: cfg.endpoint_url.clone(),
            model_name: cfg.model_name.clone(),
            dim: cfg.dim,
            batch_size: cfg.batch_size.max(1),
        })
    }

    fn post_chunk(&self, chunk: &[String]) -> std::result::Result<Vec<Vec<f32>>, (String, bool)> {
        let request = EmbedRequest {
            model: &self.model_name,
            inputs: chunk,
        };
        let mut last_err = String::new();
        for attempt in 0..MAX_ATTEMPTS {
            if attempt > 0 {
                std::thread::sleep(Duration::from_millis(BACKOFF_BASE_MS << (attempt - 1)));
            }
            match self.agent.post(&self.endpoint_url).send_json(&request) {
                Ok(mut response) => match response.body_mut().read_json::<EmbedResponse>() {
                    Ok(body) => return Ok(body.embeddings),
                    Err(e) => last_err = format!("invalid response body: {e}"),
                },
                Err(ureq::Error::StatusCode(code)) if (400..500).contains(&code) => {
                    // Client errors will not improve on retry.
                    return Err((format!("http status {code}"), false));
                }
                Err(e) => last_err = e.to_string(),
            }
        }
        Err((last_err, true))
    }
}

impl Embedder for RemoteEmbedder {
    fn fingerprint(&self) -> String {
        format!("remote:{}:{}", self.model_name, self.dim)
    }

    fn dim(&self) -> usize {
        self.dim
    }

    fn embed_batch(&self, texts: &[String]) -> Result<Vec<EmbeddingVector>> {
        let mut out = Vec::with_capacity(texts.len());
        let mut offset = 0usize;
        for chunk in texts.chunks(self.batch_size) {
            let rows = self.post_chunk(chunk).map_err(|(message, _retried)| Error::EmbeddingBatch {
                first: offset,
                last: offset + chunk.len(),
                message,
            })?;
            if rows.len() != chunk.len() {
                return Err(Error::EmbeddingBatch {
                    first: offset,
                    last: offset + chunk.len(),
                    message: format!("service returned {} vectors for {} inputs", rows.len(), chunk.len()),
                });
            }
            for row in rows {
                if row.len() != self.dim {
                    return Err(Error::DimMismatch {
                        expected: self.dim,
                        got: row.len(),
                    });
                }
                out.push(EmbeddingVector { values: row }.normalized());
            }
            offset += chunk.len();
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::ProviderKind;
    use std::io::{BufRead, BufReader, Read, Write};
    use std::net::TcpListener;
    use std::sync::atomic::{AtomicUsize, Ordering};
    use std::sync::Arc;

    /// Minimal embedding service: reads one POST, answers with unit basis
    /// vectors; optionally fails the first `fail_first` requests with 503.
    fn spawn_fake_service(dim: usize, fail_first: usize, requests_to_serve: usize) -> (String, Arc<AtomicUsize>) {
        let listener = TcpListener::bind("127.0.0.1:0").unwrap();
        let addr = listener.local_addr().unwrap();
        let counter = Arc::new(AtomicUsize::new(0));
        let served = counter.clone();
        std::thread::spawn(move || {
            for _ in 0..requests_to_serve {
                let (mut stream, _) = match listener.accept() {
                    Ok(s) => s,
                    Err(_) => return,
                };
                let n = served.fetch_add(1, Ordering::SeqCst);
                let mut reader = BufReader::new(stream.try_clone().unwrap());
                let mut content_length = 0usize;
                loop {
                    let mut line = String::new();
                    if reader.read_line(&mut line).unwrap() == 0 {
                        break;
                    }
                    let lower = line.to_lowercase();
                    if let Some(rest) = lower.strip_prefix("content-length:") {
                        content_length = rest.trim().parse().unwrap();
                    }
                    if line == "\r\n" {
                        break;
                    }
                }
                let mut body = vec![0u8; content_length];
                reader.read_exact(&mut body).unwrap();
                let request: serde_json::Value = serde_json::from_slice(&body).unwrap();
                let inputs = request["inputs"].as_array().unwrap();
                if n < fail_first {
                    let resp = "HTTP/1.1 503 Service Unavailable\r\ncontent-length: 0\r\nconnection: close\r\n\r\n";
                    stream.write_all(resp.as_bytes()).unwrap();
                    continue;
                }
                let mut rows = Vec::new();
                for (i, _) in inputs.iter().enumerate() {
                    let mut row = vec![0.0f32; dim];
                    row[i % dim] = 1.0;
                    rows.push(row);
                }
                let body = serde_json::json!({ "embeddings": rows }).to_string();
                let resp = format!(
                    "HTTP/1.1 200 OK\r\ncontent-type: application/json\r\ncontent-length: {}\r\nconnection: close\r\n\r\n{}",
                    body.len(),
                    body
                );
                stream.write_all(resp.as_bytes()).unwrap();
            }
        });
        (format!("http://{addr}"), counter)
    }

    fn remote_cfg(url: &str, dim: usize, batch: usize) -> EmbeddingProviderConfig {
        EmbeddingProviderConfig {
            provider: ProviderKind::Remote,
            endpoint_url: url.to_string(),
            model_name: "test-model".to_string(),
            dim,
            batch_size: batch,
            timeout_ms: 2_000,
            cache_path: None,
            query_prefix: None,
        }
    }

    #[test]
    fn embeds_in_batches_and_preserves_order() {
        let (url, served) = spawn_fake_service(8, 0, 2);
        let embedder = RemoteEmbedder::new(&remote_cfg(&url, 8, 3)).unwrap();
        let texts: Vec<String> = (0..5).map(|i| format!("text {i}")).collect();
        let vectors = embedder.embed_batch(&texts).unwrap();
        assert_eq!(vectors.len(), 5);
        // Basis vectors are assigned per position within each chunk.
        assert_eq!(vectors[0].values[0], 1.0);
        assert_eq!(vectors[3].values[0], 1.0);
        assert_eq!(served.load(Ordering::SeqCst), 2);
    }

    #[test]
    fn retries_transient_failures() {
        let (url, served) = spawn_fake_service(8, 1, 2);
        let embedder = RemoteEmbedder::new(&remote_cfg(&url, 8, 8)).unwrap();
        let vectors = embedder.embed_batch(&["a".to_string()]).unwrap();
        assert_eq!(vectors.len(), 1);
        assert_eq!(served.load(Ordering::SeqCst), 2);
    }

    #[test]
    fn gives_up_with_batch_indices_after_retries() {
        let (url, _) = spawn_fake_service(8, MAX_ATTEMPTS, MAX_ATTEMPTS);
        let embedder = RemoteEmbedder::new(&remote_cfg(&url, 8, 8)).unwrap();
        let err = embedder.embed_batch(&["a".to_string(), "b".to_string()]).unwrap_err();
        match err {
            Error::EmbeddingBatch { first, last, .. } => {
                assert_eq!((first, last), (0, 2));
            }
            other => panic!("unexpected error: {other}"),
        }
    }

    #[test]
    fn dim_mismatch_is_fatal() {
        let (url, _) = spawn_fake_service(8, 0, 1);
        let embedder = RemoteEmbedder::new(&remote_cfg(&url, 16, 8)).unwrap();
        let err = embedder.embed_batch(&["a".to_string()]).unwrap_err();
        assert!(matches!(err, Error::DimMismatch { expected: 16, got: 8 }));
    }
}
