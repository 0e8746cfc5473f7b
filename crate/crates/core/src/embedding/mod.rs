//! Embedding contract and similarity utilities. Two interchangeable
//! providers implement [`Embedder`]: an HTTP client for a remote embedding
//! service and a fully offline deterministic feature-hashing embedder.
//! Everything downstream works against the trait, so the whole pipeline
//! runs (and is tested) without any model download.

mod cache;
mod deterministic;
mod remote;

pub use cache::EmbeddingCache;
pub use deterministic::{deterministic_embed, DeterministicEmbedder};
pub use remote::RemoteEmbedder;

use crate::config::{EmbeddingProviderConfig, ProviderKind};
use crate::error::{Error, Result};

/// A unit-norm float32 vector.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingVector {
    pub values: Vec<f32>,
}

impl EmbeddingVector {
    pub fn dim(&self) -> usize {
        self.values.len()
    }

    pub fn l2_norm(&self) -> f64 {
        self.values.iter().map(|v| f64::from(*v) * f64::from(*v)).sum::<f64>().sqrt()
    }

    /// Scale to unit norm. A (near-)zero vector degenerates to the first
    /// basis vector so the unit-norm invariant always holds.
    pub fn normalized(mut self) -> Self {
        let norm = self.l2_norm();
        if norm < 1e-12 {
            let dim = self.values.len();
            self.values = vec![0.0; dim];
            if dim > 0 {
                self.values[0] = 1.0;
            }
            return self;
        }
        for v in &mut self.values {
            *v = (f64::from(*v) / norm) as f32;
        }
        self
    }
}

/// Dot product of two unit-norm vectors, accumulated in f64.
pub fn cosine_similarity(a: &EmbeddingVector, b: &EmbeddingVector) -> Result<f64> {
    if a.dim() != b.dim() {
        return Err(Error::DimMismatch {
            expected: a.dim(),
            got: b.dim(),
        });
    }
    let mut acc = 0.0f64;
    for (x, y) in a.values.iter().zip(&b.values) {
        acc += f64::from(*x) * f64::from(*y);
    }
    Ok(acc)
}

pub trait Embedder: Send + Sync {
    /// Identifies provider, model, and dimension; stored in index metadata
    /// so a loaded index knows what produced its vectors.
    fn fingerprint(&self) -> String;
    fn dim(&self) -> usize;
    fn embed_batch(&self, texts: &[String]) -> Result<Vec<EmbeddingVector>>;
}

pub fn build_embedder(cfg: &EmbeddingProviderConfig) -> Result<Box<dyn Embedder>> {
    if cfg.batch_size == 0 {
        return Err(Error::ProviderConfig("batch_size must be >= 1".to_string()));
    }
    match cfg.provider {
        ProviderKind::Deterministic => Ok(Box::new(DeterministicEmbedder::new(cfg.dim)?)),
        ProviderKind::Remote => Ok(Box::new(RemoteEmbedder::new(cfg)?)),
    }
}

/// Reconstruct the embedder a persisted index was built with, so queries
/// embed in the same space. Connection settings (endpoint, timeout,
/// batching) still come from `cfg`.
pub fn embedder_from_fingerprint(fingerprint: &str, cfg: &EmbeddingProviderConfig) -> Result<Box<dyn Embedder>> {
    let mut parts = fingerprint.split(':');
    let provider = parts.next().unwrap_or_default();
    let rest: Vec<&str> = parts.collect();
    let (middle, dim) = match rest.split_last() {
        Some((dim, middle)) => (middle.join(":"), dim.parse::<usize>().ok()),
        None => (String::new(), None),
    };
    let Some(dim) = dim else {
        return Err(Error::ProviderConfig(format!("unparseable embedder fingerprint: {fingerprint}")));
    };
    match provider {
        "deterministic" => Ok(Box::new(DeterministicEmbedder::new(dim)?)),
        "remote" => {
            let mut remote_cfg = cfg.clone();
            remote_cfg.provider = ProviderKind::Remote;
            remote_cfg.model_name = middle;
            remote_cfg.dim = dim;
            Ok(Box::new(RemoteEmbedder::new(&remote_cfg)?))
        }
        other => Err(Error::ProviderConfig(format!("unknown provider in fingerprint: {other}"))),
    }
}

/// Embed `texts` through `embedder`, consulting (and filling) the cache
/// when one is configured. Order-preserving; cached and uncached paths
/// return bit-identical vectors.
pub fn embed_texts(
    texts: &[String],
    embedder: &dyn Embedder,
    cache: Option<&EmbeddingCache>,
) -> Result<Vec<EmbeddingVector>> {
    let Some(cache) = cache else {
        return embedder.embed_batch(texts);
    };

    let mut out: Vec<Option<EmbeddingVector>> = vec![None; texts.len()];
    let mut missing: Vec<usize> = Vec::new();
    let fingerprint = embedder.fingerprint();
    for (i, text) in texts.iter().enumerate() {
        match cache.get(&fingerprint, text, embedder.dim())? {
            Some(v) => out[i] = Some(v),
            None => missing.push(i),
        }
    }
    if !missing.is_empty() {
        let batch: Vec<String> = missing.iter().map(|&i| texts[i].clone()).collect();
        let vectors = embedder.embed_batch(&batch)?;
        for (&i, v) in missing.iter().zip(vectors) {
            cache.put(&fingerprint, &texts[i], &v)?;
            out[i] = Some(v);
        }
    }
    Ok(out.into_iter().map(|v| v.expect("all slots filled")).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn vec_of(values: &[f32]) -> EmbeddingVector {
        EmbeddingVector {
            values: values.to_vec(),
        }
    }

    #[test]
    fn cosine_identity_and_orthogonality() {
        let e1 = vec_of(&[1.0, 0.0, 0.0]);
        let e2 = vec_of(&[0.0, 1.0, 0.0]);
        assert!((cosine_similarity(&e1, &e1).unwrap() - 1.0).abs() < 1e-9);
        assert!(cosine_similarity(&e1, &e2).unwrap().abs() < 1e-9);
    }

    #[test]
    fn cosine_rejects_dim_mismatch() {
        let a = vec_of(&[1.0, 0.0]);
        let b = vec_of(&[1.0, 0.0, 0.0]);
        assert!(matches!(
            cosine_similarity(&a, &b),
            Err(Error::DimMismatch { .. })
        ));
    }

    #[test]
    fn cosine_matches_scalar_loop_oracle() {
        // Oracle: plain indexed loop, f64 accumulation.
        fn oracle(a: &[f32], b: &[f32]) -> f64 {
            let mut s = 0.0f64;
            for i in 0..a.len() {
                s += a[i] as f64 * b[i] as f64;
            }
            s
        }
        let embedder = DeterministicEmbedder::new(32).unwrap();
        let texts: Vec<String> = (0..100).map(|i| format!("sample text number {i} with words")).collect();
        let vectors = embedder.embed_batch(&texts).unwrap();
        for pair in vectors.windows(2) {
            let got = cosine_similarity(&pair[0], &pair[1]).unwrap();
            let want = oracle(&pair[0].values, &pair[1].values);
            assert!((got - want).abs() < 1e-9);
        }
    }

    #[test]
    fn normalized_handles_zero_vector() {
        let v = vec_of(&[0.0, 0.0, 0.0, 0.0]).normalized();
        assert_eq!(v.values, vec![1.0, 0.0, 0.0, 0.0]);
    }

    #[test]
    fn unit_norm_contract() {
        let embedder = DeterministicEmbedder::new(64).unwrap();
        let v = &embedder.embed_batch(&["merge pdfs".to_string()]).unwrap()[0];
        assert!((v.l2_norm() - 1.0).abs() < 1e-6);
    }
}
