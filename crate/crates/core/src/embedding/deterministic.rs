//! Offline embedding provider: signed feature hashing of token unigrams
//! and bigrams. No model, no I/O, identical output on every platform,
//! and lexically similar texts land near each other — enough structure
//! for tests and offline runs.

use super::{Embedder, EmbeddingVector};
use crate::error::{Error, Result};
use crate::text::{fnv1a64, tokenize};

pub struct DeterministicEmbedder {
    dim: usize,
}

impl DeterministicEmbedder {
    pub fn new(dim: usize) -> Result<Self> {
        if dim < 8 {
            return Err(Error::ProviderConfig(format!(
                "deterministic embedder needs dim >= 8, got {dim}"
            )));
        }
        Ok(Self { dim })
    }
}

/// Hash unigrams and bigrams into `dim` signed buckets, then L2-normalize.
/// An empty token set maps to the degenerate first-basis vector.
pub fn deterministic_embed(text: &str, dim: usize) -> EmbeddingVector {
    let tokens = tokenize(text);
    let mut values = vec![0.0f32; dim];
    if tokens.is_empty() {
        log::warn!("embedding text with no tokens; returning degenerate vector");
        values[0] = 1.0;
        return EmbeddingVector { values };
    }
    let mut bump = |feature: &str| {
        let h = fnv1a64(feature.as_bytes());
        let idx = (h % dim as u64) as usize;
        let sign = if h >> 63 == 0 { 1.0f32 } else { -1.0f32 };
        values[idx] += sign;
    };
    for t in &tokens {
        bump(t);
    }
    for pair in tokens.windows(2) {
        bump(&format!("{} {}", pair[0], pair[1]));
    }
    EmbeddingVector { values }.normalized()
}

impl Embedder for DeterministicEmbedder {
    fn fingerprint(&self) -> String {
        format!("deterministic:fnv1a-ngram-v1:{}", self.dim)
    }

    fn dim(&self) -> usize {
        self.dim
    }

    fn embed_batch(&self, texts: &[String]) -> Result<Vec<EmbeddingVector>> {
        Ok(texts.iter().map(|t| deterministic_embed(t, self.dim)).collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::embedding::cosine_similarity;

    #[test]
    fn identical_text_identical_vector() {
        let a = deterministic_embed("a b", 64);
        let b = deterministic_embed("a b", 64);
        assert_eq!(a, b);
    }

    #[test]
    fn empty_text_is_degenerate_basis_vector() {
        let v = deterministic_embed("", 16);
        assert_eq!(v.values[0], 1.0);
        assert!(v.values[1..].iter().all(|&x| x == 0.0));
    }

    #[test]
    fn shared_tokens_score_higher_than_disjoint() {
        let close_a = deterministic_embed("merge pdf files", 128);
        let close_b = deterministic_embed("merge pdf documents", 128);
        let far = deterministic_embed("train a classifier", 128);
        let near = cosine_similarity(&close_a, &close_b).unwrap();
        let distant = cosine_similarity(&close_a, &far).unwrap();
        assert!(near > distant, "near={near} distant={distant}");
    }

    #[test]
    fn rejects_tiny_dim() {
        assert!(DeterministicEmbedder::new(4).is_err());
        assert!(DeterministicEmbedder::new(8).is_ok());
    }
}
