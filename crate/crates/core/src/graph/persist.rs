//! On-disk index format: an 8-byte magic, a version word, a JSON header
//! with all structural data, a raw little-endian payload holding every
//! float block (IDF as f64, embeddings as f32), and a trailing SHA-256
//! over the preceding bytes. Field ordering is canonical, so persisting
//! the same graph twice produces identical bytes; the trailing digest
//! doubles as the index fingerprint.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use super::{BuildMeta, SkillCommunity, SkillGraph, SkillNode};
use crate::config::hex;
use crate::embedding::EmbeddingVector;
use crate::error::{Error, Result};
use crate::subunits::{ExtractionEdge, Subunit};

pub const INDEX_VERSION: u32 = 1;
const MAGIC: &[u8; 8] = b"SKFGIDX\n";

#[derive(Serialize, Deserialize)]
struct CommunityHeader {
    community_id: u32,
    member_skill_ids: Vec<String>,
    label: String,
    representative_skill_ids: Vec<String>,
    community_text: String,
}

#[derive(Serialize, Deserialize)]
struct Header {
    dim: usize,
    skills: Vec<SkillNode>,
    subunits: Vec<Subunit>,
    edges: Vec<ExtractionEdge>,
    communities: Vec<CommunityHeader>,
    assignment: BTreeMap<String, u32>,
    build_meta: BuildMeta,
}

fn graph_dim(graph: &SkillGraph) -> Result<usize> {
    let mut dim: Option<usize> = None;
    let mut check = |d: usize| -> Result<()> {
        match dim {
            None => {
                dim = Some(d);
                Ok(())
            }
            Some(existing) if existing == d => Ok(()),
            Some(existing) => Err(Error::Config(format!(
                "mixed embedding dimensions in graph: {existing} vs {d}"
            ))),
        }
    };
    for v in graph.subunit_embeddings.values() {
        check(v.dim())?;
    }
    for v in graph.skill_desc_embeddings.values() {
        check(v.dim())?;
    }
    for c in &graph.communities {
        check(c.centroid.dim())?;
        check(c.community_text_embedding.dim())?;
    }
    Ok(dim.unwrap_or(0))
}

fn push_f32s(payload: &mut Vec<u8>, values: &[f32]) {
    for v in values {
        payload.extend_from_slice(&v.to_le_bytes());
    }
}

pub fn serialize_graph(graph: &SkillGraph) -> Result<Vec<u8>> {
    let dim = graph_dim(graph)?;
    let header = Header {
        dim,
        skills: graph.skills.clone(),
        subunits: graph.subunits.clone(),
        edges: graph.edges.clone(),
        communities: graph
            .communities
            .iter()
            .map(|c| CommunityHeader {
                community_id: c.community_id,
                member_skill_ids: c.member_skill_ids.clone(),
                label: c.label.clone(),
                representative_skill_ids: c.representative_skill_ids.clone(),
                community_text: c.community_text.clone(),
            })
            .collect(),
        assignment: graph.assignment.clone(),
        build_meta: graph.build_meta.clone(),
    };
    let header_json = serde_json::to_vec(&header)?;

    let mut payload = Vec::new();
    for s in &graph.subunits {
        let idf = graph.idf.get(&s.subunit_id).copied().ok_or_else(|| {
            Error::Config(format!("subunit {} missing from idf table", s.subunit_id))
        })?;
        payload.extend_from_slice(&idf.to_le_bytes());
    }
    for s in &graph.subunits {
        let v = graph.subunit_embeddings.get(&s.subunit_id).ok_or_else(|| {
            Error::Config(format!("subunit {} missing embedding", s.subunit_id))
        })?;
        push_f32s(&mut payload, &v.values);
    }
    for s in &graph.skills {
        let v = graph.skill_desc_embeddings.get(&s.skill_id).ok_or_else(|| {
            Error::Config(format!("skill {} missing description embedding", s.skill_id))
        })?;
        push_f32s(&mut payload, &v.values);
    }
    for c in &graph.communities {
        push_f32s(&mut payload, &c.centroid.values);
    }
    for c in &graph.communities {
        push_f32s(&mut payload, &c.community_text_embedding.values);
    }

    let mut bytes = Vec::with_capacity(8 + 4 + 16 + header_json.len() + payload.len() + 32);
    bytes.extend_from_slice(MAGIC);
    bytes.extend_from_slice(&INDEX_VERSION.to_le_bytes());
    bytes.extend_from_slice(&(header_json.len() as u64).to_le_bytes());
    bytes.extend_from_slice(&header_json);
    bytes.extend_from_slice(&(payload.len() as u64).to_le_bytes());
    bytes.extend_from_slice(&payload);
    let digest = Sha256::digest(&bytes);
    bytes.extend_from_slice(&digest);
    Ok(bytes)
}

/// Write the graph to `path`; returns the index fingerprint (hex of the
/// trailing digest).
pub fn persist_graph(graph: &SkillGraph, path: &Path) -> Result<String> {
    let bytes = serialize_graph(graph)?;
    let fingerprint = hex(&bytes[bytes.len() - 32..]);
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            fs::create_dir_all(parent)?;
        }
    }
    fs::write(path, &bytes)?;
    Ok(fingerprint)
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.pos + n > self.bytes.len() {
            return Err(Error::IndexCorrupt("unexpected end of file".to_string()));
        }
        let slice = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(slice)
    }

    fn take_u32(&mut self) -> Result<u32> {
        let b = self.take(4)?;
        Ok(u32::from_le_bytes([b[0], b[1], b[2], b[3]]))
    }

    fn take_u64(&mut self) -> Result<u64> {
        let b = self.take(8)?;
        Ok(u64::from_le_bytes(b.try_into().expect("8 bytes")))
    }

    fn take_f64(&mut self) -> Result<f64> {
        let b = self.take(8)?;
        Ok(f64::from_le_bytes(b.try_into().expect("8 bytes")))
    }

    fn take_vector(&mut self, dim: usize) -> Result<EmbeddingVector> {
        let b = self.take(dim * 4)?;
        let values = b
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
            .collect();
        Ok(EmbeddingVector { values })
    }
}

pub fn deserialize_graph(bytes: &[u8]) -> Result<(SkillGraph, String)> {
    if bytes.len() < 8 + 4 + 8 + 8 + 32 {
        return Err(Error::IndexCorrupt("file too short".to_string()));
    }
    let (body, digest) = bytes.split_at(bytes.len() - 32);
    let expected = Sha256::digest(body);
    if digest != expected.as_slice() {
        return Err(Error::IndexCorrupt("checksum mismatch".to_string()));
    }
    let fingerprint = hex(digest);

    let mut cur = Cursor { bytes: body, pos: 0 };
    if cur.take(8)? != MAGIC {
        return Err(Error::IndexCorrupt("bad magic".to_string()));
    }
    let version = cur.take_u32()?;
    if version != INDEX_VERSION {
        return Err(Error::IndexVersion {
            found: version,
            expected: INDEX_VERSION,
        });
    }
    let header_len = cur.take_u64()? as usize;
    let header_bytes = cur.take(header_len)?;
    let header: Header =
        serde_json::from_slice(header_bytes).map_err(|e| Error::IndexCorrupt(format!("bad header: {e}")))?;
    let payload_len = cur.take_u64()? as usize;
    let payload_start = cur.pos;
    if payload_start + payload_len != body.len() {
        return Err(Error::IndexCorrupt("payload length mismatch".to_string()));
    }

    let dim = header.dim;
    let mut idf = BTreeMap::new();
    for s in &header.subunits {
        idf.insert(s.subunit_id.clone(), cur.take_f64()?);
    }
    let mut subunit_embeddings = BTreeMap::new();
    for s in &header.subunits {
        subunit_embeddings.insert(s.subunit_id.clone(), cur.take_vector(dim)?);
    }
    let mut skill_desc_embeddings = BTreeMap::new();
    for s in &header.skills {
        skill_desc_embeddings.insert(s.skill_id.clone(), cur.take_vector(dim)?);
    }
    let mut centroids = Vec::new();
    for _ in &header.communities {
        centroids.push(cur.take_vector(dim)?);
    }
    let mut text_embeddings = Vec::new();
    for _ in &header.communities {
        text_embeddings.push(cur.take_vector(dim)?);
    }
    if cur.pos != body.len() {
        return Err(Error::IndexCorrupt("trailing bytes after payload".to_string()));
    }

    let communities: Vec<SkillCommunity> = header
        .communities
        .into_iter()
        .zip(centroids)
        .zip(text_embeddings)
        .map(|((c, centroid), community_text_embedding)| SkillCommunity {
            community_id: c.community_id,
            member_skill_ids: c.member_skill_ids,
            centroid,
            label: c.label,
            representative_skill_ids: c.representative_skill_ids,
            community_text: c.community_text,
            community_text_embedding,
        })
        .collect();

    let graph = SkillGraph {
        skills: header.skills,
        subunits: header.subunits,
        edges: header.edges,
        communities,
        assignment: header.assignment,
        subunit_embeddings,
        skill_desc_embeddings,
        idf,
        build_meta: header.build_meta,
    };
    Ok((graph, fingerprint))
}

/// Read a graph from `path`; returns it with the verified fingerprint.
pub fn load_graph(path: &Path) -> Result<(SkillGraph, String)> {
    let bytes = fs::read(path)?;
    deserialize_graph(&bytes)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::SkillForgeConfig;
    use crate::corpus::SkillDocument;
    use crate::embedding::DeterministicEmbedder;
    use crate::graph::build_graph;

    fn corpus(n: usize) -> Vec<SkillDocument> {
        (0..n)
            .map(|i| SkillDocument {
                skill_id: format!("skill-{i:02}"),
                name: format!("skill-{i:02}"),
                description: format!("Handles workflow number {i} for testing."),
                body: vec![
                    format!("1. Convert the input file number {i}"),
                    "Always check the result before saving".to_string(),
                ],
                resources: vec![],
            })
            .collect()
    }

    fn build(n: usize) -> SkillGraph {
        let mut cfg = SkillForgeConfig::default();
        cfg.embedding.dim = 16;
        let embedder = DeterministicEmbedder::new(16).unwrap();
        build_graph(&corpus(n), &cfg, &embedder, None).unwrap()
    }

    fn empty_graph() -> SkillGraph {
        SkillGraph {
            skills: vec![],
            subunits: vec![],
            edges: vec![],
            communities: vec![],
            assignment: BTreeMap::new(),
            subunit_embeddings: BTreeMap::new(),
            skill_desc_embeddings: BTreeMap::new(),
            idf: BTreeMap::new(),
            build_meta: BuildMeta {
                embedder_fingerprint: "none".to_string(),
                config_hash: "none".to_string(),
                build_unix_ms: 0,
            },
        }
    }

    #[test]
    fn round_trip_empty_graph() {
        let g = empty_graph();
        let bytes = serialize_graph(&g).unwrap();
        let (back, _) = deserialize_graph(&bytes).unwrap();
        assert_eq!(g, back);
    }

    #[test]
    fn round_trip_is_equal_and_byte_stable() {
        let g = build(16);
        let tmp = tempfile::tempdir().unwrap();
        let path = tmp.path().join("skillgraph.idx");
        let fp1 = persist_graph(&g, &path).unwrap();
        let (loaded, fp2) = load_graph(&path).unwrap();
        assert_eq!(g, loaded);
        assert_eq!(fp1, fp2);

        let bytes1 = fs::read(&path).unwrap();
        let fp3 = persist_graph(&loaded, &path).unwrap();
        let bytes2 = fs::read(&path).unwrap();
        assert_eq!(bytes1, bytes2);
        assert_eq!(fp1, fp3);
    }

    #[test]
    fn truncated_file_is_corrupt_not_a_crash() {
        let g = build(4);
        let bytes = serialize_graph(&g).unwrap();
        for cut in [0, 5, 13, bytes.len() / 2, bytes.len() - 1] {
            let err = deserialize_graph(&bytes[..cut]).unwrap_err();
            assert!(matches!(err, Error::IndexCorrupt(_)), "cut={cut} gave {err}");
        }
    }

    #[test]
    fn flipped_byte_fails_checksum() {
        let g = build(4);
        let mut bytes = serialize_graph(&g).unwrap();
        let mid = bytes.len() / 2;
        bytes[mid] ^= 0xff;
        assert!(matches!(deserialize_graph(&bytes), Err(Error::IndexCorrupt(_))));
    }

    #[test]
    fn version_mismatch_is_explicit() {
        let g = build(4);
        let mut bytes = serialize_graph(&g).unwrap();
        // Bump the version word and re-sign the body so only the version
        // check can fail.
        bytes[8] = 99;
        let body_len = bytes.len() - 32;
        let digest = Sha256::digest(&bytes[..body_len]);
        bytes[body_len..].copy_from_slice(&digest);
        let err = deserialize_graph(&bytes).unwrap_err();
        assert!(matches!(err, Error::IndexVersion { found: 99, expected: 1 }));
    }
}
