//! The multi-level skill graph: skills, their extracted subunits with
//! extraction edges, IDF over subunits, compact high-IDF skill
//! representations, and hard skill communities with deterministic
//! label-plus-representatives texts. [`build_graph`] assembles it all;
//! `persist`/`load` give it a stable on-disk form.

mod kmeans;
mod persist;

pub use kmeans::{run_kmeans, KMeansResult};
pub use persist::{deserialize_graph, load_graph, persist_graph, serialize_graph, INDEX_VERSION};

use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet};

use crate::config::SkillForgeConfig;
use crate::corpus::SkillDocument;
use crate::embedding::{embed_texts, Embedder, EmbeddingCache, EmbeddingVector};
use crate::error::{Error, Result};
use crate::subunits::{build_subunit_set, ExtractionEdge, Lexicons, Subunit};
use crate::text::tokenize;

const STOPWORDS: &str = include_str!("../../data/stopwords.txt");

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SkillNode {
    pub skill_id: String,
    pub name: String,
    pub description: String,
    /// Name, description, and the skill's top-IDF subunit texts.
    pub representation_text: String,
    pub resource_count: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SkillCommunity {
    pub community_id: u32,
    pub member_skill_ids: Vec<String>,
    pub centroid: EmbeddingVector,
    pub label: String,
    pub representative_skill_ids: Vec<String>,
    pub community_text: String,
    pub community_text_embedding: EmbeddingVector,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BuildMeta {
    pub embedder_fingerprint: String,
    pub config_hash: String,
    pub build_unix_ms: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SkillGraph {
    /// Sorted by skill_id.
    pub skills: Vec<SkillNode>,
    /// Sorted by normalized text.
    pub subunits: Vec<Subunit>,
    /// Sorted by (skill_id, subunit_id); unique.
    pub edges: Vec<ExtractionEdge>,
    pub communities: Vec<SkillCommunity>,
    /// skill_id -> community_id; total over skills.
    pub assignment: BTreeMap<String, u32>,
    pub subunit_embeddings: BTreeMap<String, EmbeddingVector>,
    pub skill_desc_embeddings: BTreeMap<String, EmbeddingVector>,
    /// subunit_id -> ln(|S| / deg).
    pub idf: BTreeMap<String, f64>,
    pub build_meta: BuildMeta,
}

pub fn community_count_for(n_skills: usize) -> usize {
    (n_skills as u64).isqrt().max(1).min(n_skills as u64) as usize
}

/// idf(u) = ln(|S| / deg(u)); rarer subunits score higher.
pub fn compute_idf(n_skills: usize, edges: &[ExtractionEdge]) -> BTreeMap<String, f64> {
    let mut deg: BTreeMap<&str, usize> = BTreeMap::new();
    for e in edges {
        *deg.entry(e.subunit_id.as_str()).or_insert(0) += 1;
    }
    deg.into_iter()
        .map(|(id, d)| (id.to_string(), (n_skills as f64 / d as f64).ln()))
        .collect()
}

/// Concatenate name, description, and the skill's top-r subunit texts by
/// descending IDF (ties by text).
pub fn build_skill_representation(
    name: &str,
    description: &str,
    subunit_texts_with_idf: &[(f64, String)],
    top_r: usize,
) -> String {
    let mut ranked: Vec<&(f64, String)> = subunit_texts_with_idf.iter().collect();
    ranked.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap_or(std::cmp::Ordering::Equal).then(a.1.cmp(&b.1)));
    let mut parts = vec![name.to_string(), description.to_string()];
    parts.extend(ranked.into_iter().take(top_r).map(|(_, t)| t.clone()));
    parts.join(". ")
}

fn stopword_set(cfg: &SkillForgeConfig) -> BTreeSet<String> {
    match &cfg.graph.stopwords {
        Some(list) => list.iter().map(|w| w.to_lowercase()).collect(),
        None => STOPWORDS
            .lines()
            .map(str::trim)
            .filter(|l| !l.is_empty() && !l.starts_with('#'))
            .map(|l| l.to_lowercase())
            .collect(),
    }
}

/// Top-L label tokens for a community: member token occurrences weighted
/// by token-level IDF over all skills' representation texts, stopwords
/// excluded, ties lexicographic.
fn community_label(
    member_indices: &[usize],
    skill_tokens: &[Vec<String>],
    token_df: &BTreeMap<String, usize>,
    n_skills: usize,
    stopwords: &BTreeSet<String>,
    label_tokens: usize,
) -> String {
    let mut weight: BTreeMap<&str, f64> = BTreeMap::new();
    for &i in member_indices {
        for tok in &skill_tokens[i] {
            if stopwords.contains(tok) {
                continue;
            }
            let df = token_df.get(tok).copied().unwrap_or(1).max(1);
            let idf = (n_skills as f64 / df as f64).ln();
            *weight.entry(tok.as_str()).or_insert(0.0) += idf;
        }
    }
    let mut ranked: Vec<(&str, f64)> = weight.into_iter().collect();
    ranked.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap_or(std::cmp::Ordering::Equal).then(a.0.cmp(b.0)));
    let mut chosen: Vec<&str> = ranked.iter().take(label_tokens).map(|(t, _)| *t).collect();
    if chosen.is_empty() {
        // All member tokens were stopwords; fall back to raw tokens.
        let mut counts: BTreeMap<&str, usize> = BTreeMap::new();
        for &i in member_indices {
            for tok in &skill_tokens[i] {
                *counts.entry(tok.as_str()).or_insert(0) += 1;
            }
        }
        let mut ranked: Vec<(&str, usize)> = counts.into_iter().collect();
        ranked.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(b.0)));
        chosen = ranked.iter().take(label_tokens).map(|(t, _)| *t).collect();
    }
    if chosen.is_empty() {
        return "community".to_string();
    }
    chosen.join(" ")
}

fn euclid2(a: &EmbeddingVector, b: &EmbeddingVector) -> f64 {
    a.values
        .iter()
        .zip(&b.values)
        .map(|(x, y)| (f64::from(*x) - f64::from(*y)).powi(2))
        .sum()
}

/// Build one community node: label, nearest-to-centroid representatives,
/// and the deterministic community text (not yet embedded).
pub fn build_community(
    community_id: u32,
    member_indices: &[usize],
    centroid: EmbeddingVector,
    skills: &[SkillNode],
    repr_embeddings: &[EmbeddingVector],
    skill_tokens: &[Vec<String>],
    token_df: &BTreeMap<String, usize>,
    cfg: &SkillForgeConfig,
    stopwords: &BTreeSet<String>,
) -> SkillCommunity {
    let n_skills = skills.len();
    let label = community_label(
        member_indices,
        skill_tokens,
        token_df,
        n_skills,
        stopwords,
        cfg.graph.label_tokens,
    );

    let mut by_distance: Vec<&usize> = member_indices.iter().collect();
    by_distance.sort_by(|&&a, &&b| {
        let da = euclid2(&repr_embeddings[a], &centroid);
        let db = euclid2(&repr_embeddings[b], &centroid);
        da.partial_cmp(&db)
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(skills[a].skill_id.cmp(&skills[b].skill_id))
    });
    let representative_skill_ids: Vec<String> = by_distance
        .iter()
        .take(cfg.graph.representatives)
        .map(|&&i| skills[i].skill_id.clone())
        .collect();

    let reps_text = representative_skill_ids
        .iter()
        .map(|id| {
            let s = skills.iter().find(|s| &s.skill_id == id).expect("representative exists");
            format!(
                "{}: {}",
                s.name,
                crate::text::truncate_tokens(&s.description, cfg.graph.community_desc_tokens)
            )
        })
        .collect::<Vec<_>>()
        .join("; ");
    let community_text = format!("label: {label}. skills: {reps_text}");

    SkillCommunity {
        community_id,
        member_skill_ids: member_indices.iter().map(|&i| skills[i].skill_id.clone()).collect(),
        centroid,
        label,
        representative_skill_ids,
        community_text,
        community_text_embedding: EmbeddingVector { values: vec![] },
    }
}

/// Assemble the full graph from parsed documents.
pub fn build_graph(
    docs: &[SkillDocument],
    cfg: &SkillForgeConfig,
    embedder: &dyn Embedder,
    cache: Option<&EmbeddingCache>,
) -> Result<SkillGraph> {
    if docs.is_empty() {
        return Err(Error::EmptyRepository);
    }
    let mut docs: Vec<&SkillDocument> = docs.iter().collect();
    docs.sort_by(|a, b| a.skill_id.cmp(&b.skill_id));
    let n_skills = docs.len();

    let lex = Lexicons::from_config(&cfg.subunits);
    let owned: Vec<SkillDocument> = docs.iter().map(|d| (*d).clone()).collect();
    let (subunits, edges) = build_subunit_set(&owned, &lex, &cfg.subunits)?;
    let idf = compute_idf(n_skills, &edges);

    // Per-skill subunit texts for the representation digest.
    let text_by_id: BTreeMap<&str, &str> = subunits
        .iter()
        .map(|s| (s.subunit_id.as_str(), s.text.as_str()))
        .collect();
    let mut per_skill: BTreeMap<&str, Vec<(f64, String)>> = BTreeMap::new();
    for e in &edges {
        let text = text_by_id[e.subunit_id.as_str()];
        let score = idf[e.subunit_id.as_str()];
        per_skill
            .entry(e.skill_id.as_str())
            .or_default()
            .push((score, text.to_string()));
    }

    let skills: Vec<SkillNode> = docs
        .iter()
        .map(|d| {
            let subs = per_skill.get(d.skill_id.as_str()).map(Vec::as_slice).unwrap_or(&[]);
            SkillNode {
                skill_id: d.skill_id.clone(),
                name: d.name.clone(),
                description: d.description.clone(),
                representation_text: build_skill_representation(
                    &d.name,
                    &d.description,
                    subs,
                    cfg.graph.representation_subunits,
                ),
                resource_count: d.resources.len(),
            }
        })
        .collect();

    // Embed subunits, descriptions, and representation texts.
    let subunit_texts: Vec<String> = subunits.iter().map(|s| s.text.clone()).collect();
    let desc_texts: Vec<String> = skills.iter().map(|s| s.description.clone()).collect();
    let repr_texts: Vec<String> = skills.iter().map(|s| s.representation_text.clone()).collect();
    let subunit_vecs = embed_texts(&subunit_texts, embedder, cache)?;
    let desc_vecs = embed_texts(&desc_texts, embedder, cache)?;
    let repr_vecs = embed_texts(&repr_texts, embedder, cache)?;

    // Cluster skills into communities.
    let k = community_count_for(n_skills);
    let result = run_kmeans(&repr_vecs, k, &cfg.graph.kmeans)?;

    let mut members: BTreeMap<u32, Vec<usize>> = BTreeMap::new();
    for (i, &c) in result.assignment.iter().enumerate() {
        members.entry(c as u32).or_default().push(i);
    }

    let skill_tokens: Vec<Vec<String>> = skills.iter().map(|s| tokenize(&s.representation_text)).collect();
    let mut token_df: BTreeMap<String, usize> = BTreeMap::new();
    for tokens in &skill_tokens {
        let uniq: BTreeSet<&String> = tokens.iter().collect();
        for t in uniq {
            *token_df.entry(t.clone()).or_insert(0) += 1;
        }
    }
    let stopwords = stopword_set(cfg);

    let mut communities = Vec::new();
    let mut assignment: BTreeMap<String, u32> = BTreeMap::new();
    // Renumber communities densely in ascending original-cluster order so
    // ids are stable and gap-free.
    for (new_id, (orig_cluster, member_indices)) in members.iter().enumerate() {
        let new_id = new_id as u32;
        let centroid_raw = &result.centroids[*orig_cluster as usize];
        let centroid = EmbeddingVector {
            values: centroid_raw.iter().map(|v| *v as f32).collect(),
        }
        .normalized();
        let community = build_community(
            new_id,
            member_indices,
            centroid,
            &skills,
            &repr_vecs,
            &skill_tokens,
            &token_df,
            cfg,
            &stopwords,
        );
        for id in &community.member_skill_ids {
            assignment.insert(id.clone(), new_id);
        }
        communities.push(community);
    }

    // Embed the community texts in one batch.
    let community_texts: Vec<String> = communities.iter().map(|c| c.community_text.clone()).collect();
    let community_vecs = embed_texts(&community_texts, embedder, cache)?;
    for (c, v) in communities.iter_mut().zip(community_vecs) {
        c.community_text_embedding = v;
    }

    let subunit_embeddings = subunits
        .iter()
        .zip(subunit_vecs)
        .map(|(s, v)| (s.subunit_id.clone(), v))
        .collect();
    let skill_desc_embeddings = skills
        .iter()
        .zip(desc_vecs)
        .map(|(s, v)| (s.skill_id.clone(), v))
        .collect();

    Ok(SkillGraph {
        skills,
        subunits,
        edges,
        communities,
        assignment,
        subunit_embeddings,
        skill_desc_embeddings,
        idf,
        build_meta: BuildMeta {
            embedder_fingerprint: embedder.fingerprint(),
            config_hash: cfg.config_hash(),
            build_unix_ms: cfg.build_unix_ms,
        },
    })
}

/// Read-optimized view over an immutable graph: id lookups, adjacency in
/// both directions, and subunit degrees.
pub struct PreparedGraph {
    pub graph: SkillGraph,
    skill_index: BTreeMap<String, usize>,
    subunit_index: BTreeMap<String, usize>,
    skill_subunits: BTreeMap<String, Vec<String>>,
    subunit_skills: BTreeMap<String, Vec<String>>,
}

impl PreparedGraph {
    pub fn new(graph: SkillGraph) -> Self {
        let skill_index = graph
            .skills
            .iter()
            .enumerate()
            .map(|(i, s)| (s.skill_id.clone(), i))
            .collect();
        let subunit_index = graph
            .subunits
            .iter()
            .enumerate()
            .map(|(i, s)| (s.subunit_id.clone(), i))
            .collect();
        let mut skill_subunits: BTreeMap<String, Vec<String>> = BTreeMap::new();
        let mut subunit_skills: BTreeMap<String, Vec<String>> = BTreeMap::new();
        for e in &graph.edges {
            skill_subunits.entry(e.skill_id.clone()).or_default().push(e.subunit_id.clone());
            subunit_skills.entry(e.subunit_id.clone()).or_default().push(e.skill_id.clone());
        }
        Self {
            graph,
            skill_index,
            subunit_index,
            skill_subunits,
            subunit_skills,
        }
    }

    pub fn skill(&self, skill_id: &str) -> Option<&SkillNode> {
        self.skill_index.get(skill_id).map(|&i| &self.graph.skills[i])
    }

    pub fn subunit(&self, subunit_id: &str) -> Option<&Subunit> {
        self.subunit_index.get(subunit_id).map(|&i| &self.graph.subunits[i])
    }

    pub fn degree(&self, subunit_id: &str) -> usize {
        self.subunit_skills.get(subunit_id).map(Vec::len).unwrap_or(0)
    }

    pub fn subunits_of(&self, skill_id: &str) -> &[String] {
        self.skill_subunits.get(skill_id).map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn skills_of(&self, subunit_id: &str) -> &[String] {
        self.subunit_skills.get(subunit_id).map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn community_of(&self, skill_id: &str) -> Option<u32> {
        self.graph.assignment.get(skill_id).copied()
    }

    pub fn has_edge(&self, skill_id: &str, subunit_id: &str) -> bool {
        self.subunit_skills
            .get(subunit_id)
            .is_some_and(|skills| skills.binary_search_by(|s| s.as_str().cmp(skill_id)).is_ok())
    }
}
