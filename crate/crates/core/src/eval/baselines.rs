//! Retrieval baselines: flat name+description embedding ranking, and the
//! pooled variant that hands a bounded candidate pool to a pluggable
//! selector (identity top-k by default; a hosted selector can be plugged
//! in through the callback).

use crate::config::SkillForgeConfig;
use crate::embedding::{cosine_similarity, embed_texts, Embedder, EmbeddingCache};
use crate::error::Result;
use crate::graph::PreparedGraph;
use crate::retrieval::PreparedTask;

pub const LLM_POOL_SIZE: usize = 32;

/// Rank every skill by similarity between the task and an embedding of
/// `"name: description"`. Returns the full ranking, best first.
pub fn baseline_vanilla_rank(
    task: &PreparedTask,
    prepared: &PreparedGraph,
    embedder: &dyn Embedder,
    cache: Option<&EmbeddingCache>,
) -> Result<Vec<(String, f64)>> {
    let texts: Vec<String> = prepared
        .graph
        .skills
        .iter()
        .map(|s| format!("{}: {}", s.name, s.description))
        .collect();
    let vectors = embed_texts(&texts, embedder, cache)?;
    let mut scored: Vec<(String, f64)> = prepared
        .graph
        .skills
        .iter()
        .zip(vectors)
        .map(|(s, v)| Ok((s.skill_id.clone(), cosine_similarity(&task.embedding, &v)?)))
        .collect::<Result<_>>()?;
    scored.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap_or(std::cmp::Ordering::Equal).then(a.0.cmp(&b.0)));
    Ok(scored)
}

/// Top-k of the vanilla ranking.
pub fn baseline_vanilla(
    task: &PreparedTask,
    prepared: &PreparedGraph,
    embedder: &dyn Embedder,
    cache: Option<&EmbeddingCache>,
    cfg: &SkillForgeConfig,
) -> Result<Vec<(String, f64)>> {
    let mut ranking = baseline_vanilla_rank(task, prepared, embedder, cache)?;
    ranking.truncate(cfg.retrieval.top_k);
    Ok(ranking)
}

/// Candidate pool for selector-based retrieval: the best pool-size skills
/// of the vanilla ranking.
pub fn baseline_llm_pool(
    task: &PreparedTask,
    prepared: &PreparedGraph,
    embedder: &dyn Embedder,
    cache: Option<&EmbeddingCache>,
) -> Result<Vec<String>> {
    let ranking = baseline_vanilla_rank(task, prepared, embedder, cache)?;
    Ok(ranking.into_iter().take(LLM_POOL_SIZE).map(|(id, _)| id).collect())
}

/// A selector maps the candidate pool to chosen skill ids. The hosted
/// model that fills this role in production is out of scope here; the
/// default selector is the identity prefix.
pub type SkillSelector<'a> = &'a dyn Fn(&[String]) -> Vec<String>;

pub fn select_from_pool(pool: &[String], selector: Option<SkillSelector>, k: usize) -> Vec<String> {
    match selector {
        Some(f) => {
            let mut chosen = f(pool);
            // The selector may only pick ids from the pool.
            chosen.retain(|id| pool.contains(id));
            chosen.truncate(k);
            chosen
        }
        None => pool.iter().take(k).cloned().collect(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::embedding::DeterministicEmbedder;
    use crate::eval::synthetic::generate_corpus;
    use crate::graph::build_graph;
    use crate::retrieval::{prepare_task, TaskRequest};

    fn setup() -> (PreparedGraph, SkillForgeConfig, DeterministicEmbedder) {
        let mut cfg = SkillForgeConfig::default();
        cfg.embedding.dim = 32;
        let embedder = DeterministicEmbedder::new(32).unwrap();
        let docs = generate_corpus(40, 9);
        let graph = build_graph(&docs, &cfg, &embedder, None).unwrap();
        (PreparedGraph::new(graph), cfg, embedder)
    }

    #[test]
    fn vanilla_ranks_all_and_truncates_to_k() {
        let (prepared, cfg, embedder) = setup();
        let task = prepare_task(
            TaskRequest::new("t", "manage citation bibtex workflows").unwrap(),
            &embedder,
            None,
            &cfg,
        )
        .unwrap();
        let full = baseline_vanilla_rank(&task, &prepared, &embedder, None).unwrap();
        assert_eq!(full.len(), prepared.graph.skills.len());
        for pair in full.windows(2) {
            assert!(pair[0].1 >= pair[1].1);
        }
        let top = baseline_vanilla(&task, &prepared, &embedder, None, &cfg).unwrap();
        assert_eq!(top.len(), cfg.retrieval.top_k);
        assert_eq!(top[0].0, full[0].0);
    }

    #[test]
    fn pool_is_bounded_and_prefix_of_ranking() {
        let (prepared, cfg, embedder) = setup();
        let task = prepare_task(
            TaskRequest::new("t", "export deploy manifests").unwrap(),
            &embedder,
            None,
            &cfg,
        )
        .unwrap();
        let pool = baseline_llm_pool(&task, &prepared, &embedder, None).unwrap();
        assert_eq!(pool.len(), LLM_POOL_SIZE.min(prepared.graph.skills.len()));
        let full = baseline_vanilla_rank(&task, &prepared, &embedder, None).unwrap();
        for (p, (id, _)) in pool.iter().zip(&full) {
            assert_eq!(p, id);
        }
        let _ = cfg;
    }

    #[test]
    fn default_selector_is_identity_prefix() {
        let pool: Vec<String> = (0..8).map(|i| format!("s{i}")).collect();
        assert_eq!(select_from_pool(&pool, None, 3), vec!["s0", "s1", "s2"]);
    }

    #[test]
    fn selector_output_is_sanitized() {
        let pool: Vec<String> = (0..8).map(|i| format!("s{i}")).collect();
        let selector = |p: &[String]| {
            let mut v: Vec<String> = p.iter().rev().cloned().collect();
            v.push("not-in-pool".to_string());
            v
        };
        let chosen = select_from_pool(&pool, Some(&selector), 4);
        assert_eq!(chosen, vec!["s7", "s6", "s5", "s4"]);
    }
}
