//! Chunk embeddings.
//!
//! Two providers share one contract: fixed dimension, unit-normalized output,
//! and a zero vector for text with no tokens. Similarity everywhere in the
//! crate is the dot product of these unit vectors.

mod hashed;
mod remote;

pub use hashed::{fnv1a64, hash_embed, HashedEmbedder};
pub use remote::RemoteEmbedder;

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

pub const DEFAULT_DIMENSION: usize = 256;

/// Environment variable overriding the remote embedder endpoint.
pub const ENDPOINT_ENV: &str = "LONGSYNTH_EMBED_ENDPOINT";

#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingVector {
    values: Vec<f32>,
    norm: f32,
}

impl EmbeddingVector {
    /// L2-normalizes `values`; an all-zero input stays zero.
    pub fn normalized(mut values: Vec<f32>) -> Self {
        let sq: f64 = values.iter().map(|&x| (x as f64) * (x as f64)).sum();
        if sq == 0.0 {
            return EmbeddingVector { values, norm: 0.0 };
        }
        let inv = (1.0 / sq.sqrt()) as f32;
        for x in &mut values {
            *x *= inv;
        }
        let norm = values.iter().map(|&x| (x as f64) * (x as f64)).sum::<f64>().sqrt() as f32;
        EmbeddingVector { values, norm }
    }

    pub fn zeros(dim: usize) -> Self {
        EmbeddingVector {
            values: vec![0.0; dim],
            norm: 0.0,
        }
    }

    pub fn values(&self) -> &[f32] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f32> {
        self.values
    }

    pub fn dim(&self) -> usize {
        self.values.len()
    }

    pub fn norm(&self) -> f32 {
        self.norm
    }

    pub fn is_zero(&self) -> bool {
        self.norm == 0.0
    }

    pub fn cosine(&self, other: &EmbeddingVector) -> f32 {
        dot(&self.values, &other.values)
    }
}

/// Sequential dot product. Every similarity in the crate goes through here so
/// rankings are reproducible bit for bit.
#[inline]
pub fn dot(a: &[f32], b: &[f32]) -> f32 {
    let mut acc = 0.0f32;
    for (x, y) in a.iter().zip(b) {
        acc += x * y;
    }
    acc
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Provider {
    #[default]
    LocalHashed,
    RemoteService,
}

impl Provider {
    pub fn as_str(self) -> &'static str {
        match self {
            Provider::LocalHashed => "local-hashed",
            Provider::RemoteService => "remote-service",
        }
    }

    pub(crate) fn code(self) -> u8 {
        match self {
            Provider::LocalHashed => 0,
            Provider::RemoteService => 1,
        }
    }

    pub(crate) fn from_code(code: u8) -> Option<Self> {
        match code {
            0 => Some(Provider::LocalHashed),
            1 => Some(Provider::RemoteService),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EmbedderConfig {
    pub provider: Provider,
    pub dimension: usize,
    pub endpoint: Option<String>,
    pub batch_size: usize,
    pub timeout_secs: u64,
    pub retries: u32,
    pub backoff_base_ms: u64,
    pub max_in_flight: usize,
}

impl Default for EmbedderConfig {
    fn default() -> Self {
        EmbedderConfig {
            provider: Provider::LocalHashed,
            dimension: DEFAULT_DIMENSION,
            endpoint: None,
            batch_size: 32,
            timeout_secs: 30,
            retries: 3,
            backoff_base_ms: 200,
            max_in_flight: 4,
        }
    }
}

impl EmbedderConfig {
    pub fn local(dimension: usize) -> Self {
        EmbedderConfig {
            dimension,
            ..Default::default()
        }
    }

    pub fn remote(endpoint: impl Into<String>, dimension: usize) -> Self {
        EmbedderConfig {
            provider: Provider::RemoteService,
            dimension,
            endpoint: Some(endpoint.into()),
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.dimension == 0 {
            return Err(Error::Config("embedding dimension must be positive".into()));
        }
        if self.batch_size == 0 {
            return Err(Error::Config("batch size must be positive".into()));
        }
        if self.max_in_flight == 0 {
            return Err(Error::Config("max in-flight requests must be positive".into()));
        }
        match (self.provider, &self.endpoint) {
            (Provider::RemoteService, None) => Err(Error::Config("remote embedder requires an endpoint".into())),
            (Provider::LocalHashed, Some(_)) => Err(Error::Config("endpoint given for the local embedder".into())),
            _ => Ok(()),
        }
    }
}

pub enum Embedder {
    Local(HashedEmbedder),
    Remote(RemoteEmbedder),
}

impl Embedder {
    pub fn new(cfg: &EmbedderConfig) -> Result<Self> {
        cfg.validate()?;
        Ok(match cfg.provider {
            Provider::LocalHashed => Embedder::Local(HashedEmbedder::new(cfg.dimension)),
            Provider::RemoteService => Embedder::Remote(RemoteEmbedder::new(cfg.clone())?),
        })
    }

    pub fn dimension(&self) -> usize {
        match self {
            Embedder::Local(e) => e.dimension(),
            Embedder::Remote(e) => e.dimension(),
        }
    }

    pub fn embed_text(&self, text: &str) -> Result<EmbeddingVector> {
        match self {
            Embedder::Local(e) => Ok(e.embed(text)),
            Embedder::Remote(e) => Ok(e.embed_batch(&[text])?.remove(0)),
        }
    }

    /// Output order matches input order.
    pub fn embed_batch<S: AsRef<str> + Sync>(&self, texts: &[S]) -> Result<Vec<EmbeddingVector>> {
        match self {
            Embedder::Local(e) => Ok(texts.iter().map(|t| e.embed(t.as_ref())).collect()),
            Embedder::Remote(e) => e.embed_batch(texts),
        }
    }
}

pub fn embed_text(text: &str, cfg: &EmbedderConfig) -> Result<EmbeddingVector> {
    Embedder::new(cfg)?.embed_text(text)
}

pub fn embed_batch<S: AsRef<str> + Sync>(texts: &[S], cfg: &EmbedderConfig) -> Result<Vec<EmbeddingVector>> {
    Embedder::new(cfg)?.embed_batch(texts)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn config_validation() {
        assert!(EmbedderConfig::default().validate().is_ok());
        let cfg = EmbedderConfig {
            provider: Provider::RemoteService,
            ..Default::default()
        };
        assert!(matches!(cfg.validate(), Err(Error::Config(_))));
        assert!(EmbedderConfig::remote("http://x", 8).validate().is_ok());
        assert!(EmbedderConfig::local(0).validate().is_err());
        let mut cfg = EmbedderConfig::local(8);
        cfg.endpoint = Some("http://x".into());
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn batch_matches_pointwise() {
        let cfg = EmbedderConfig::local(64);
        let batch = embed_batch(&["alpha beta", "", "gamma"], &cfg).unwrap();
        assert_eq!(batch[0], embed_text("alpha beta", &cfg).unwrap());
        assert!(batch[1].is_zero());
        assert_eq!(batch[2], embed_text("gamma", &cfg).unwrap());
    }

    #[test]
    fn normalized_vector_has_unit_norm() {
        let v = EmbeddingVector::normalized(vec![3.0, 4.0]);
        assert!((v.norm() - 1.0).abs() < 1e-6);
        assert!((v.cosine(&v) - 1.0).abs() < 1e-6);
        assert!(EmbeddingVector::normalized(vec![0.0; 3]).is_zero());
    }
}
