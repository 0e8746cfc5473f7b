//! Pipeline configuration. Every threshold, cap, weight, and budget the
//! engine uses lives here with its documented default, so a single JSON
//! config file (or programmatic override) controls indexing, retrieval,
//! and compilation end to end.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::path::PathBuf;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SkillForgeConfig {
    pub embedding: EmbeddingProviderConfig,
    pub subunits: SubunitConfig,
    pub graph: GraphConfig,
    pub retrieval: RetrievalConfig,
    pub rescue: RescueConfig,
    pub affiliate: AffiliateConfig,
    pub compile: CompileConfig,
    /// Recorded in the index build metadata. Defaults to 0 so re-indexing
    /// an unchanged tree stays byte-identical; set it explicitly when a
    /// wall-clock stamp is wanted.
    pub build_unix_ms: u64,
}

impl Default for SkillForgeConfig {
    fn default() -> Self {
        Self {
            embedding: EmbeddingProviderConfig::default(),
            subunits: SubunitConfig::default(),
            graph: GraphConfig::default(),
            retrieval: RetrievalConfig::default(),
            rescue: RescueConfig::default(),
            affiliate: AffiliateConfig::default(),
            compile: CompileConfig::default(),
            build_unix_ms: 0,
        }
    }
}

impl SkillForgeConfig {
    /// Hash of the canonical JSON form; stored in the index metadata.
    pub fn config_hash(&self) -> String {
        let json = serde_json::to_vec(self).expect("config serializes");
        let mut hasher = Sha256::new();
        hasher.update(&json);
        hex(&hasher.finalize())
    }
}

pub(crate) fn hex(bytes: &[u8]) -> String {
    let mut out = String::with_capacity(bytes.len() * 2);
    for b in bytes {
        out.push_str(&format!("{b:02x}"));
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ProviderKind {
    Remote,
    Deterministic,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EmbeddingProviderConfig {
    pub provider: ProviderKind,
    pub endpoint_url: String,
    pub model_name: String,
    pub dim: usize,
    pub batch_size: usize,
    pub timeout_ms: u64,
    pub cache_path: Option<PathBuf>,
    /// Optional instruction prefix prepended to task text before embedding
    /// (some embedding models expect one). Corpus texts are always embedded
    /// raw.
    pub query_prefix: Option<String>,
}

impl Default for EmbeddingProviderConfig {
    fn default() -> Self {
        Self {
            provider: ProviderKind::Deterministic,
            endpoint_url: "http://127.0.0.1:8756/v1/embeddings".to_string(),
            model_name: "BAAI/bge-small-en".to_string(),
            dim: 384,
            batch_size: 32,
            timeout_ms: 10_000,
            cache_path: None,
            query_prefix: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SubunitConfig {
    pub min_token_len: usize,
    pub max_token_len: usize,
    pub max_constraint_tokens: usize,
    /// Overrides the built-in imperative verb lexicon when set.
    pub imperative_verbs: Option<Vec<String>>,
    /// Overrides the built-in requirement keyword lexicon when set.
    pub requirement_keywords: Option<Vec<String>>,
}

impl Default for SubunitConfig {
    fn default() -> Self {
        Self {
            min_token_len: 3,
            max_token_len: 32,
            max_constraint_tokens: 24,
            imperative_verbs: None,
            requirement_keywords: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GraphConfig {
    /// Top subunits by IDF folded into each skill's representation text.
    pub representation_subunits: usize,
    /// Tokens in a community label.
    pub label_tokens: usize,
    /// Representative skills named in a community text.
    pub representatives: usize,
    /// Token cap on each representative description inside community text.
    pub community_desc_tokens: usize,
    pub kmeans: KMeansConfig,
    /// Overrides the built-in label stopword list when set.
    pub stopwords: Option<Vec<String>>,
}

impl Default for GraphConfig {
    fn default() -> Self {
        Self {
            representation_subunits: 8,
            label_tokens: 5,
            representatives: 3,
            community_desc_tokens: 24,
            kmeans: KMeansConfig::default(),
            stopwords: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct KMeansConfig {
    pub seed: u64,
    pub n_init: usize,
    pub max_iters: usize,
    /// Relative inertia improvement below which a run stops.
    pub tol: f64,
}

impl Default for KMeansConfig {
    fn default() -> Self {
        Self {
            seed: 42,
            n_init: 10,
            max_iters: 300,
            tol: 1e-4,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RetrievalConfig {
    /// Weight on skill-description similarity.
    pub alpha: f64,
    /// Weight on projected subunit evidence.
    pub beta: f64,
    /// Weight on the skill name score.
    pub gamma: f64,
    /// Multiplicative boost for skills in the matched communities.
    pub lambda: f64,
    pub top_k: usize,
    pub top_communities: usize,
    pub top_subunits: usize,
    pub max_highlights: usize,
}

impl Default for RetrievalConfig {
    fn default() -> Self {
        Self {
            alpha: 0.5,
            beta: 0.3,
            gamma: 0.2,
            lambda: 0.25,
            top_k: 5,
            top_communities: 2,
            top_subunits: 30,
            max_highlights: 3,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RescueConfig {
    /// Minimum frontier-normalized score of a non-selected source skill.
    pub parent_threshold: f64,
    /// Minimum task similarity of a rescued subunit.
    pub subunit_threshold: f64,
    pub global_cap: usize,
    pub per_parent_cap: usize,
    /// Token-Jaccard at or above which a candidate is redundant.
    pub redundancy_jaccard: f64,
}

impl Default for RescueConfig {
    fn default() -> Self {
        Self {
            parent_threshold: 0.35,
            subunit_threshold: 0.12,
            global_cap: 3,
            per_parent_cap: 1,
            redundancy_jaccard: 0.6,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AffiliateConfig {
    /// Feature weights, in order: q_rel, f_skill, r_sel, g_same, g_active.
    pub weights: [f64; 5],
    /// Margin between best and second-best attachment that earns the bonus.
    pub exclusivity_gap: f64,
    pub exclusivity_bonus: f64,
    /// Subtracted when the cue's source skill sits outside the communities
    /// of the selected skills.
    pub inactive_group_penalty: f64,
    /// Minimum adjusted score for a cue to survive gating.
    pub affiliation_threshold: f64,
}

impl Default for AffiliateConfig {
    fn default() -> Self {
        Self {
            weights: [0.15, 0.45, 0.10, 0.15, 0.15],
            exclusivity_gap: 0.10,
            exclusivity_bonus: 0.05,
            inactive_group_penalty: 0.10,
            affiliation_threshold: 0.30,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CompileConfig {
    /// Hard token limit on the compiled packet.
    pub budget_tokens: usize,
    /// Token cap on the task digest section.
    pub task_digest_tokens: usize,
    /// Token cap on each skill's one-line description.
    pub skill_line_tokens: usize,
    /// When set, token counting switches to ceil(chars / n) instead of the
    /// shared tokenizer.
    pub approx_chars_per_token: Option<usize>,
}

impl Default for CompileConfig {
    fn default() -> Self {
        Self {
            budget_tokens: 384,
            task_digest_tokens: 96,
            skill_line_tokens: 24,
            approx_chars_per_token: None,
        }
    }
}
