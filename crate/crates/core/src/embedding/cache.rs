//! On-disk embedding cache: one file per (fingerprint, text) key holding
//! raw little-endian f32 bytes. Reads need no lock; writes go through a
//! mutex and land via tmp-file rename so readers never see a torn entry.

use sha2::{Digest, Sha256};
use std::fs;
use std::path::PathBuf;
use std::sync::Mutex;

use super::EmbeddingVector;
use crate::config::hex;
use crate::error::Result;

pub struct EmbeddingCache {
    dir: PathBuf,
    write_lock: Mutex<()>,
}

impl EmbeddingCache {
    pub fn open(dir: impl Into<PathBuf>) -> Result<Self> {
        let dir = dir.into();
        fs::create_dir_all(&dir)?;
        Ok(Self {
            dir,
            write_lock: Mutex::new(()),
        })
    }

    fn entry_path(&self, fingerprint: &str, text: &str) -> PathBuf {
        let mut hasher = Sha256::new();
        hasher.update(fingerprint.as_bytes());
        hasher.update([0u8]);
        hasher.update(text.as_bytes());
        self.dir.join(format!("{}.vec", hex(&hasher.finalize())))
    }

    pub fn get(&self, fingerprint: &str, text: &str, dim: usize) -> Result<Option<EmbeddingVector>> {
        let path = self.entry_path(fingerprint, text);
        let bytes = match fs::read(&path) {
            Ok(b) => b,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(None),
            Err(e) => return Err(e.into()),
        };
        if bytes.len() != dim * 4 {
            // Stale or truncated entry: treat as a miss and let the writer
            // replace it.
            return Ok(None);
        }
        let values = bytes
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
            .collect();
        Ok(Some(EmbeddingVector { values }))
    }

    pub fn put(&self, fingerprint: &str, text: &str, vector: &EmbeddingVector) -> Result<()> {
        let path = self.entry_path(fingerprint, text);
        let mut bytes = Vec::with_capacity(vector.values.len() * 4);
        for v in &vector.values {
            bytes.extend_from_slice(&v.to_le_bytes());
        }
        let _guard = self.write_lock.lock().expect("cache lock");
        let tmp = path.with_extension("tmp");
        fs::write(&tmp, &bytes)?;
        fs::rename(&tmp, &path)?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::embedding::{embed_texts, DeterministicEmbedder, Embedder};

    #[test]
    fn cache_hit_is_bit_identical() {
        let tmp = tempfile::tempdir().unwrap();
        let cache = EmbeddingCache::open(tmp.path()).unwrap();
        let embedder = DeterministicEmbedder::new(32).unwrap();
        let texts = vec!["merge pdfs".to_string(), "sort tables".to_string()];

        let first = embed_texts(&texts, &embedder, Some(&cache)).unwrap();
        let second = embed_texts(&texts, &embedder, Some(&cache)).unwrap();
        for (a, b) in first.iter().zip(&second) {
            let a_bytes: Vec<u8> = a.values.iter().flat_map(|v| v.to_le_bytes()).collect();
            let b_bytes: Vec<u8> = b.values.iter().flat_map(|v| v.to_le_bytes()).collect();
            assert_eq!(a_bytes, b_bytes);
        }
    }

    #[test]
    fn cached_and_uncached_paths_agree() {
        let tmp = tempfile::tempdir().unwrap();
        let cache = EmbeddingCache::open(tmp.path()).unwrap();
        let embedder = DeterministicEmbedder::new(32).unwrap();
        let texts = vec!["alpha beta".to_string()];
        let cached = embed_texts(&texts, &embedder, Some(&cache)).unwrap();
        let direct = embedder.embed_batch(&texts).unwrap();
        assert_eq!(cached, direct);
    }

    #[test]
    fn different_fingerprints_do_not_collide() {
        let tmp = tempfile::tempdir().unwrap();
        let cache = EmbeddingCache::open(tmp.path()).unwrap();
        let small = DeterministicEmbedder::new(16).unwrap();
        let large = DeterministicEmbedder::new(32).unwrap();
        let texts = vec!["same text".to_string()];
        let a = embed_texts(&texts, &small, Some(&cache)).unwrap();
        let b = embed_texts(&texts, &large, Some(&cache)).unwrap();
        assert_eq!(a[0].dim(), 16);
        assert_eq!(b[0].dim(), 32);
    }

    #[test]
    fn wrong_size_entry_is_a_miss() {
        let tmp = tempfile::tempdir().unwrap();
        let cache = EmbeddingCache::open(tmp.path()).unwrap();
        let embedder = DeterministicEmbedder::new(16).unwrap();
        let v = embedder.embed_batch(&["x y z".to_string()]).unwrap().remove(0);
        cache.put(&embedder.fingerprint(), "x y z", &v).unwrap();
        // Ask with a different dim: stored bytes no longer fit.
        assert!(cache.get(&embedder.fingerprint(), "x y z", 32).unwrap().is_none());
    }
}
