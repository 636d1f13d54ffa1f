//! JSON-over-HTTP embedding client.
//!
//! `POST <endpoint>/embed` with `{"texts": [...]}`; the service answers
//! `{"embeddings": [[f32; D], ...]}`. Batches are sent with a bounded number
//! of requests in flight and reassembled in input order.

use super::EmbeddingVector;
use crate::embedding::EmbedderConfig;
use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};
use std::time::Duration;

#[derive(Serialize)]
struct EmbedRequest<'a> {
    texts: Vec<&'a str>,
}

#[derive(Deserialize)]
struct EmbedResponse {
    embeddings: Vec<Vec<f32>>,
}

enum Failure {
    Retryable(String),
    Fatal(Error),
}

pub struct RemoteEmbedder {
    cfg: EmbedderConfig,
    url: String,
    agent: ureq::Agent,
}

impl RemoteEmbedder {
    pub fn new(cfg: EmbedderConfig) -> Result<Self> {
        let endpoint = cfg
            .endpoint
            .clone()
            .ok_or_else(|| Error::Config("remote embedder requires an endpoint".into()))?;
        let url = format!("{}/embed", endpoint.trim_end_matches('/'));
        let agent: ureq::Agent = ureq::Agent::config_builder()
            .timeout_global(Some(Duration::from_secs(cfg.timeout_secs.max(1))))
            .build()
            .into();
        Ok(RemoteEmbedder { cfg, url, agent })
    }

    pub fn dimension(&self) -> usize {
        self.cfg.dimension
    }

    pub fn embed_batch<S: AsRef<str> + Sync>(&self, texts: &[S]) -> Result<Vec<EmbeddingVector>> {
        let dim = self.cfg.dimension;
        let mut out: Vec<Option<EmbeddingVector>> = vec![None; texts.len()];
        // Empty strings never leave the process.
        let live: Vec<usize> = (0..texts.len())
            .filter(|&i| {
                let empty = texts[i].as_ref().is_empty();
                if empty {
                    log::warn!("empty text at position {i} embedded as the zero vector");
                }
                !empty
            })
            .collect();
        let batches: Vec<&[usize]> = live.chunks(self.cfg.batch_size).collect();
        for wave in batches.chunks(self.cfg.max_in_flight) {
            let results: Vec<Result<Vec<EmbeddingVector>>> = std::thread::scope(|scope| {
                let handles: Vec<_> = wave
                    .iter()
                    .map(|batch| {
                        let items: Vec<&str> = batch.iter().map(|&i| texts[i].as_ref()).collect();
                        let (start, end) = (batch[0], batch[batch.len() - 1] + 1);
                        scope.spawn(move || self.send_with_retry(&items, start, end))
                    })
                    .collect();
                handles
                    .into_iter()
                    .map(|h| h.join().expect("embedding request thread panicked"))
                    .collect()
            });
            for (batch, result) in wave.iter().zip(results) {
                for (&i, v) in batch.iter().zip(result?) {
                    out[i] = Some(v);
                }
            }
        }
        Ok(out
            .into_iter()
            .map(|v| v.unwrap_or_else(|| EmbeddingVector::zeros(dim)))
            .collect())
    }

    fn send_with_retry(&self, items: &[&str], start: usize, end: usize) -> Result<Vec<EmbeddingVector>> {
        let attempts = self.cfg.retries + 1;
        let mut last = String::new();
        for attempt in 0..attempts {
            if attempt > 0 {
                let backoff = self.cfg.backoff_base_ms.saturating_mul(1 << (attempt - 1).min(16));
                std::thread::sleep(Duration::from_millis(backoff));
            }
            match self.send(items) {
                Ok(v) => return Ok(v),
                Err(Failure::Fatal(e)) => return Err(e),
                Err(Failure::Retryable(reason)) => {
                    log::warn!(
                        "embedding batch {start}..{end} attempt {} failed: {reason}",
                        attempt + 1
                    );
                    last = reason;
                }
            }
        }
        Err(Error::Remote {
            start,
            end,
            attempts,
            reason: last,
        })
    }

    fn send(&self, items: &[&str]) -> Result<Vec<EmbeddingVector>, Failure> {
        let body = EmbedRequest { texts: items.to_vec() };
        let mut resp = self
            .agent
            .post(&self.url)
            .send_json(&body)
            .map_err(|e| Failure::Retryable(e.to_string()))?;
        let status = resp.status().as_u16();
        if status != 200 {
            return Err(Failure::Retryable(format!("status {status}")));
        }
        let parsed: EmbedResponse = resp
            .body_mut()
            .read_json()
            .map_err(|e| Failure::Retryable(format!("bad response body: {e}")))?;
        if parsed.embeddings.len() != items.len() {
            return Err(Failure::Retryable(format!(
                "expected {} embeddings, got {}",
                items.len(),
                parsed.embeddings.len()
            )));
        }
        parsed
            .embeddings
            .into_iter()
            .map(|v| {
                if v.len() != self.cfg.dimension {
                    Err(Failure::Fatal(Error::Dimension {
                        expected: self.cfg.dimension,
                        actual: v.len(),
                    }))
                } else {
                    Ok(EmbeddingVector::normalized(v))
                }
            })
            .collect()
    }
}
