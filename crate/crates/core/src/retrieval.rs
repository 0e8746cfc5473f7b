//! Online skill retrieval. A task request is matched top-down against
//! community texts (members of the best communities get a multiplicative
//! boost) and bottom-up against subunits (the top task-matched subunits
//! project degree-normalized evidence back to their source skills). The
//! fused score ranks all skills; the result carries the selected set,
//! per-skill subunit highlights, and a frontier of non-selected rescue
//! candidates for the compiler.

use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet};

use crate::config::SkillForgeConfig;
use crate::embedding::{cosine_similarity, embed_texts, Embedder, EmbeddingCache, EmbeddingVector};
use crate::error::{Error, Result};
use crate::graph::PreparedGraph;
use crate::text::{jaccard, token_set, tokenize};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TaskRequest {
    pub task_id: String,
    pub text: String,
}

impl TaskRequest {
    pub fn new(task_id: impl Into<String>, text: impl Into<String>) -> Result<Self> {
        let text = text.into();
        if text.trim().is_empty() {
            return Err(Error::EmptyTask);
        }
        Ok(Self {
            task_id: task_id.into(),
            text,
        })
    }
}

/// A task with its embedding and token list computed.
pub struct PreparedTask {
    pub request: TaskRequest,
    pub embedding: EmbeddingVector,
    pub tokens: Vec<String>,
}

pub fn prepare_task(
    request: TaskRequest,
    embedder: &dyn Embedder,
    cache: Option<&EmbeddingCache>,
    cfg: &SkillForgeConfig,
) -> Result<PreparedTask> {
    let embed_input = match &cfg.embedding.query_prefix {
        Some(prefix) if !prefix.is_empty() => format!("{prefix}{}", request.text),
        _ => request.text.clone(),
    };
    let embedding = embed_texts(&[embed_input], embedder, cache)?.remove(0);
    let tokens = tokenize(&request.text);
    Ok(PreparedTask {
        request,
        embedding,
        tokens,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoredSkill {
    pub skill_id: String,
    pub l1: f64,
    pub l0: f64,
    pub name_score: f64,
    pub community_boosted: bool,
    pub final_score: f64,
    /// Dense 1-based rank over all skills.
    pub rank: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubunitHighlight {
    pub subunit_id: String,
    pub text: String,
    /// Task similarity of the subunit.
    pub sigma: f64,
    /// sigma / deg: the subunit's per-skill evidence share.
    pub contribution: f64,
    pub source_skill_id: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RescueCandidateRecord {
    pub parent_skill_id: String,
    /// Min-max normalized over the rescue frontier.
    pub parent_score_normalized: f64,
    /// (subunit_id, sigma) of the parent's retained subunits.
    pub candidate_subunits: Vec<(String, f64)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RetrievalResult {
    pub task_id: String,
    /// K(q): the top-k skills in rank order.
    pub selected: Vec<ScoredSkill>,
    /// H(q): per selected skill, at most max_highlights subunits.
    pub highlights: BTreeMap<String, Vec<SubunitHighlight>>,
    /// R(q): bounded frontier of non-selected skills with their evidence.
    pub rescue: Vec<RescueCandidateRecord>,
    /// Community ids whose members form the boosted set.
    pub matched_communities: Vec<u32>,
    /// Top task-matched subunits as (subunit_id, sigma), best first.
    pub retained_subunits: Vec<(String, f64)>,
}

/// Min-max over the given map; if every value is equal (or the map is
/// empty) everything normalizes to zero.
pub(crate) fn min_max_normalize(values: &BTreeMap<String, f64>) -> BTreeMap<String, f64> {
    let mut min = f64::INFINITY;
    let mut max = f64::NEG_INFINITY;
    for v in values.values() {
        min = min.min(*v);
        max = max.max(*v);
    }
    let span = max - min;
    values
        .iter()
        .map(|(k, v)| {
            let n = if span > 0.0 { (v - min) / span } else { 0.0 };
            (k.clone(), n)
        })
        .collect()
}

/// Top communities by similarity between the task and each community
/// text; their members form the boosted set.
pub fn match_communities(
    task_embedding: &EmbeddingVector,
    prepared: &PreparedGraph,
    cfg: &SkillForgeConfig,
) -> Result<(Vec<u32>, BTreeSet<String>)> {
    let mut scored: Vec<(f64, u32)> = Vec::with_capacity(prepared.graph.communities.len());
    for c in &prepared.graph.communities {
        let score = cosine_similarity(task_embedding, &c.community_text_embedding)?;
        scored.push((score, c.community_id));
    }
    scored.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap_or(std::cmp::Ordering::Equal).then(a.1.cmp(&b.1)));
    let chosen: Vec<u32> = scored
        .iter()
        .take(cfg.retrieval.top_communities)
        .map(|(_, id)| *id)
        .collect();
    let mut boosted = BTreeSet::new();
    for id in &chosen {
        let community = prepared
            .graph
            .communities
            .iter()
            .find(|c| c.community_id == *id)
            .expect("chosen community exists");
        boosted.extend(community.member_skill_ids.iter().cloned());
    }
    Ok((chosen, boosted))
}

/// Similarity of the task to every subunit, keeping the top N.
pub fn match_subunits(
    task_embedding: &EmbeddingVector,
    prepared: &PreparedGraph,
    cfg: &SkillForgeConfig,
) -> Result<Vec<(String, f64)>> {
    let mut scored: Vec<(String, f64)> = Vec::with_capacity(prepared.graph.subunits.len());
    for s in &prepared.graph.subunits {
        let emb = &prepared.graph.subunit_embeddings[&s.subunit_id];
        scored.push((s.subunit_id.clone(), cosine_similarity(task_embedding, emb)?));
    }
    scored.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap_or(std::cmp::Ordering::Equal).then(a.0.cmp(&b.0)));
    scored.truncate(cfg.retrieval.top_subunits);
    Ok(scored)
}

/// Raw bottom-up evidence per skill: each retained subunit contributes
/// sigma / deg through every extraction edge it has into the skill.
pub fn project_l0_raw(retained: &[(String, f64)], prepared: &PreparedGraph) -> BTreeMap<String, f64> {
    let mut raw: BTreeMap<String, f64> = BTreeMap::new();
    for (subunit_id, sigma) in retained {
        let deg = prepared.degree(subunit_id);
        if deg == 0 {
            continue;
        }
        let share = sigma / deg as f64;
        for skill_id in prepared.skills_of(subunit_id) {
            *raw.entry(skill_id.clone()).or_insert(0.0) += share;
        }
    }
    raw
}

/// Normalized bottom-up evidence: min-max over the skills that received
/// any contribution; skills with none score zero.
pub fn project_l0(retained: &[(String, f64)], prepared: &PreparedGraph) -> BTreeMap<String, f64> {
    let raw = project_l0_raw(retained, prepared);
    let normalized = min_max_normalize(&raw);
    let mut out: BTreeMap<String, f64> = prepared
        .graph
        .skills
        .iter()
        .map(|s| (s.skill_id.clone(), 0.0))
        .collect();
    for (k, v) in normalized {
        out.insert(k, v);
    }
    out
}

/// Skill-level scores: l1 is min-max normalized description similarity,
/// the name score is min-max normalized token Jaccard between task and
/// skill name.
pub fn skill_level_scores(
    task_embedding: &EmbeddingVector,
    task_tokens: &[String],
    prepared: &PreparedGraph,
) -> Result<(BTreeMap<String, f64>, BTreeMap<String, f64>)> {
    let task_token_set: BTreeSet<String> = task_tokens.iter().cloned().collect();
    let mut l1_raw = BTreeMap::new();
    let mut p_raw = BTreeMap::new();
    for s in &prepared.graph.skills {
        let emb = &prepared.graph.skill_desc_embeddings[&s.skill_id];
        l1_raw.insert(s.skill_id.clone(), cosine_similarity(task_embedding, emb)?);
        let name_tokens = token_set(&s.name);
        p_raw.insert(s.skill_id.clone(), jaccard(&task_token_set, &name_tokens));
    }
    Ok((min_max_normalize(&l1_raw), min_max_normalize(&p_raw)))
}

/// Fused score for every skill, ranked. final = (a*l1 + b*l0 + g*p) *
/// (1 + lambda * boosted); ties break on skill_id.
pub fn rank_all(
    l1: &BTreeMap<String, f64>,
    l0: &BTreeMap<String, f64>,
    name_score: &BTreeMap<String, f64>,
    boosted: &BTreeSet<String>,
    prepared: &PreparedGraph,
    cfg: &SkillForgeConfig,
) -> Vec<ScoredSkill> {
    let r = &cfg.retrieval;
    let mut scored: Vec<ScoredSkill> = prepared
        .graph
        .skills
        .iter()
        .map(|s| {
            let id = &s.skill_id;
            let l1v = l1.get(id).copied().unwrap_or(0.0);
            let l0v = l0.get(id).copied().unwrap_or(0.0);
            let pv = name_score.get(id).copied().unwrap_or(0.0);
            let in_boost = boosted.contains(id);
            let base = r.alpha * l1v + r.beta * l0v + r.gamma * pv;
            let final_score = base * (1.0 + r.lambda * f64::from(u8::from(in_boost)));
            ScoredSkill {
                skill_id: id.clone(),
                l1: l1v,
                l0: l0v,
                name_score: pv,
                community_boosted: in_boost,
                final_score,
                rank: 0,
            }
        })
        .collect();
    scored.sort_by(|a, b| {
        b.final_score
            .partial_cmp(&a.final_score)
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(a.skill_id.cmp(&b.skill_id))
    });
    for (i, s) in scored.iter_mut().enumerate() {
        s.rank = i + 1;
    }
    scored
}

/// For each selected skill, its retained subunits ranked by contribution,
/// then sigma, then id; deduplicated; at most max_highlights kept.
pub fn export_highlights(
    selected: &[ScoredSkill],
    retained: &[(String, f64)],
    prepared: &PreparedGraph,
    cfg: &SkillForgeConfig,
) -> BTreeMap<String, Vec<SubunitHighlight>> {
    let mut out = BTreeMap::new();
    for s in selected {
        let mut candidates: Vec<SubunitHighlight> = Vec::new();
        for (subunit_id, sigma) in retained {
            if !prepared.has_edge(&s.skill_id, subunit_id) {
                continue;
            }
            let deg = prepared.degree(subunit_id) as f64;
            let text = prepared.subunit(subunit_id).map(|u| u.text.clone()).unwrap_or_default();
            candidates.push(SubunitHighlight {
                subunit_id: subunit_id.clone(),
                text,
                sigma: *sigma,
                contribution: sigma / deg,
                source_skill_id: s.skill_id.clone(),
            });
        }
        candidates.sort_by(|a, b| {
            b.contribution
                .partial_cmp(&a.contribution)
                .unwrap_or(std::cmp::Ordering::Equal)
                .then(b.sigma.partial_cmp(&a.sigma).unwrap_or(std::cmp::Ordering::Equal))
                .then(a.subunit_id.cmp(&b.subunit_id))
        });
        let mut seen = BTreeSet::new();
        candidates.retain(|c| seen.insert(c.subunit_id.clone()));
        candidates.truncate(cfg.retrieval.max_highlights);
        out.insert(s.skill_id.clone(), candidates);
    }
    out
}

/// Rescue frontier: the best non-selected skills, bounded by
/// max(10, 4k), each with a frontier-normalized score and its retained
/// subunits.
pub fn export_rescue_candidates(
    ranking: &[ScoredSkill],
    selected: &[ScoredSkill],
    retained: &[(String, f64)],
    prepared: &PreparedGraph,
    cfg: &SkillForgeConfig,
) -> Vec<RescueCandidateRecord> {
    let selected_ids: BTreeSet<&str> = selected.iter().map(|s| s.skill_id.as_str()).collect();
    let bound = 10usize.max(4 * cfg.retrieval.top_k);
    let frontier: Vec<&ScoredSkill> = ranking
        .iter()
        .filter(|s| !selected_ids.contains(s.skill_id.as_str()))
        .take(bound)
        .collect();

    let frontier_scores: BTreeMap<String, f64> = frontier
        .iter()
        .map(|s| (s.skill_id.clone(), s.final_score))
        .collect();
    let normalized = min_max_normalize(&frontier_scores);

    frontier
        .iter()
        .map(|s| {
            let mut subs: Vec<(String, f64)> = retained
                .iter()
                .filter(|(u, _)| prepared.has_edge(&s.skill_id, u))
                .cloned()
                .collect();
            subs.sort_by(|a, b| {
                b.1.partial_cmp(&a.1).unwrap_or(std::cmp::Ordering::Equal).then(a.0.cmp(&b.0))
            });
            RescueCandidateRecord {
                parent_skill_id: s.skill_id.clone(),
                parent_score_normalized: normalized[&s.skill_id],
                candidate_subunits: subs,
            }
        })
        .collect()
}

/// Run the full retrieval stage for one task.
pub fn retrieve(task: &PreparedTask, prepared: &PreparedGraph, cfg: &SkillForgeConfig) -> Result<RetrievalResult> {
    let (matched_communities, boosted) = match_communities(&task.embedding, prepared, cfg)?;
    let retained = match_subunits(&task.embedding, prepared, cfg)?;
    let l0 = project_l0(&retained, prepared);
    let (l1, name_score) = skill_level_scores(&task.embedding, &task.tokens, prepared)?;
    let ranking = rank_all(&l1, &l0, &name_score, &boosted, prepared, cfg);
    let selected: Vec<ScoredSkill> = ranking.iter().take(cfg.retrieval.top_k).cloned().collect();
    let highlights = export_highlights(&selected, &retained, prepared, cfg);
    let rescue = export_rescue_candidates(&ranking, &selected, &retained, prepared, cfg);
    Ok(RetrievalResult {
        task_id: task.request.task_id.clone(),
        selected,
        highlights,
        rescue,
        matched_communities,
        retained_subunits: retained,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::SkillDocument;
    use crate::embedding::DeterministicEmbedder;
    use crate::graph::build_graph;

    const DIM: usize = 32;

    fn doc(id: &str, description: &str, body: &[&str]) -> SkillDocument {
        SkillDocument {
            skill_id: id.to_string(),
            name: id.to_string(),
            description: description.to_string(),
            body: body.iter().map(|s| s.to_string()).collect(),
            resources: vec![],
        }
    }

    fn topic_corpus(n: usize) -> Vec<SkillDocument> {
        let topics = ["citation", "spreadsheet", "imaging", "deploy", "audio", "network"];
        (0..n)
            .map(|i| {
                let topic = topics[i % topics.len()];
                doc(
                    &format!("{topic}-task-{i:02}"),
                    &format!("Work with {topic} data and produce {topic} reports for case {i}."),
                    &[
                        &format!("1. Convert the {topic} source bundle {i}"),
                        &format!("Always validate the {topic} output file"),
                        &format!("Run `{topic}-tool --strict part-{i}.dat`"),
                        &format!("- Export the {topic} summary table"),
                    ],
                )
            })
            .collect()
    }

    fn setup(n: usize) -> (PreparedGraph, SkillForgeConfig, DeterministicEmbedder) {
        let mut cfg = SkillForgeConfig::default();
        cfg.embedding.dim = DIM;
        let embedder = DeterministicEmbedder::new(DIM).unwrap();
        let graph = build_graph(&topic_corpus(n), &cfg, &embedder, None).unwrap();
        (PreparedGraph::new(graph), cfg, embedder)
    }

    fn task(text: &str, embedder: &DeterministicEmbedder, cfg: &SkillForgeConfig) -> PreparedTask {
        prepare_task(TaskRequest::new("t1", text).unwrap(), embedder, None, cfg).unwrap()
    }

    #[test]
    fn empty_task_text_is_rejected() {
        assert!(matches!(TaskRequest::new("t", "  "), Err(Error::EmptyTask)));
    }

    #[test]
    fn single_community_boosts_everyone() {
        let (prepared, cfg, embedder) = setup(3); // sqrt(3) -> 1 community
        let t = task("convert the citation source bundle", &embedder, &cfg);
        let (ids, boosted) = match_communities(&t.embedding, &prepared, &cfg).unwrap();
        assert_eq!(ids.len(), 1);
        assert_eq!(boosted.len(), prepared.graph.skills.len());
    }

    #[test]
    fn top_communities_match_sort_oracle() {
        let (prepared, cfg, embedder) = setup(16); // 4 communities
        let t = task("validate the imaging output file", &embedder, &cfg);
        let (ids, _) = match_communities(&t.embedding, &prepared, &cfg).unwrap();
        assert_eq!(ids.len(), 2);
        // Oracle: score every community, full sort.
        let mut oracle: Vec<(f64, u32)> = prepared
            .graph
            .communities
            .iter()
            .map(|c| {
                (
                    cosine_similarity(&t.embedding, &c.community_text_embedding).unwrap(),
                    c.community_id,
                )
            })
            .collect();
        oracle.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap().then(a.1.cmp(&b.1)));
        let want: Vec<u32> = oracle.iter().take(2).map(|(_, id)| *id).collect();
        assert_eq!(ids, want);
    }

    #[test]
    fn retained_subunits_match_sort_oracle() {
        let (prepared, cfg, embedder) = setup(12);
        let t = task("export the spreadsheet summary table", &embedder, &cfg);
        let retained = match_subunits(&t.embedding, &prepared, &cfg).unwrap();
        let mut oracle: Vec<(String, f64)> = prepared
            .graph
            .subunits
            .iter()
            .map(|s| {
                (
                    s.subunit_id.clone(),
                    cosine_similarity(&t.embedding, &prepared.graph.subunit_embeddings[&s.subunit_id]).unwrap(),
                )
            })
            .collect();
        oracle.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap().then(a.0.cmp(&b.0)));
        oracle.truncate(cfg.retrieval.top_subunits);
        assert_eq!(retained, oracle);
    }

    #[test]
    fn small_corpus_retains_everything() {
        let (prepared, cfg, embedder) = setup(2);
        let t = task("anything at all", &embedder, &cfg);
        let retained = match_subunits(&t.embedding, &prepared, &cfg).unwrap();
        assert_eq!(retained.len(), prepared.graph.subunits.len());
        assert!(retained.len() < cfg.retrieval.top_subunits);
    }

    #[test]
    fn identical_text_gives_sigma_one() {
        let (prepared, cfg, embedder) = setup(4);
        let some_subunit = prepared.graph.subunits[0].text.clone();
        let t = task(&some_subunit, &embedder, &cfg);
        let retained = match_subunits(&t.embedding, &prepared, &cfg).unwrap();
        let hit = retained
            .iter()
            .find(|(id, _)| prepared.subunit(id).unwrap().text == some_subunit)
            .expect("subunit retained");
        assert!((hit.1 - 1.0).abs() < 1e-6);
    }

    #[test]
    fn raw_projection_matches_double_loop_oracle() {
        let (prepared, cfg, embedder) = setup(12);
        let t = task("always validate the citation output file", &embedder, &cfg);
        let retained = match_subunits(&t.embedding, &prepared, &cfg).unwrap();
        let raw = project_l0_raw(&retained, &prepared);
        // Brute-force oracle: double loop over skills and retained.
        let mut oracle: BTreeMap<String, f64> = BTreeMap::new();
        for skill in &prepared.graph.skills {
            let mut acc = 0.0;
            let mut any = false;
            for (u, sigma) in &retained {
                let has_edge = prepared
                    .graph
                    .edges
                    .iter()
                    .any(|e| e.skill_id == skill.skill_id && &e.subunit_id == u);
                if has_edge {
                    acc += sigma / prepared.degree(u) as f64;
                    any = true;
                }
            }
            if any {
                oracle.insert(skill.skill_id.clone(), acc);
            }
        }
        assert_eq!(raw.len(), oracle.len());
        for (k, v) in &oracle {
            assert!((raw[k] - v).abs() < 1e-12, "skill {k}");
        }
    }

    #[test]
    fn degree_conservation() {
        let (prepared, cfg, embedder) = setup(10);
        let t = task("convert the deploy source bundle", &embedder, &cfg);
        let retained = match_subunits(&t.embedding, &prepared, &cfg).unwrap();
        for (u, sigma) in &retained {
            let deg = prepared.degree(u);
            let total: f64 = prepared.skills_of(u).iter().map(|_| sigma / deg as f64).sum();
            assert!((total - sigma).abs() < 1e-9);
        }
    }

    #[test]
    fn min_max_degenerate_rule() {
        let mut m = BTreeMap::new();
        m.insert("a".to_string(), 0.7);
        m.insert("b".to_string(), 0.7);
        let n = min_max_normalize(&m);
        assert_eq!(n["a"], 0.0);
        assert_eq!(n["b"], 0.0);
        assert!(min_max_normalize(&BTreeMap::new()).is_empty());
    }

    #[test]
    fn one_skill_corpus_normalizes_to_zero() {
        let (prepared, cfg, embedder) = setup(1);
        let t = task("work with citation data", &embedder, &cfg);
        let (l1, p) = skill_level_scores(&t.embedding, &t.tokens, &prepared).unwrap();
        assert_eq!(l1.values().copied().collect::<Vec<_>>(), vec![0.0]);
        assert_eq!(p.values().copied().collect::<Vec<_>>(), vec![0.0]);
    }

    #[test]
    fn exact_description_attains_l1_max() {
        let (prepared, cfg, embedder) = setup(8);
        let desc = prepared.graph.skills[3].description.clone();
        let t = task(&desc, &embedder, &cfg);
        let (l1, _) = skill_level_scores(&t.embedding, &t.tokens, &prepared).unwrap();
        let target = &prepared.graph.skills[3].skill_id;
        assert!((l1[target] - 1.0).abs() < 1e-9);
        assert!(l1.values().all(|v| *v <= 1.0 + 1e-12));
    }

    #[test]
    fn name_overlap_gives_positive_score() {
        let (prepared, cfg, embedder) = setup(8);
        let t = task("citation task 00 cleanup", &embedder, &cfg);
        let (_, p) = skill_level_scores(&t.embedding, &t.tokens, &prepared).unwrap();
        assert!(p["citation-task-00"] > 0.0);
    }

    #[test]
    fn alpha_only_ranking_equals_l1_ranking() {
        let (prepared, mut cfg, embedder) = setup(10);
        cfg.retrieval.alpha = 1.0;
        cfg.retrieval.beta = 0.0;
        cfg.retrieval.gamma = 0.0;
        cfg.retrieval.lambda = 0.0;
        let t = task("produce imaging reports for case 2", &embedder, &cfg);
        let result = retrieve(&t, &prepared, &cfg).unwrap();
        let (l1, _) = skill_level_scores(&t.embedding, &t.tokens, &prepared).unwrap();
        let mut by_l1: Vec<(String, f64)> = l1.into_iter().collect();
        by_l1.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap().then(a.0.cmp(&b.0)));
        let want: Vec<String> = by_l1.iter().take(cfg.retrieval.top_k).map(|(k, _)| k.clone()).collect();
        let got: Vec<String> = result.selected.iter().map(|s| s.skill_id.clone()).collect();
        assert_eq!(got, want);
    }

    #[test]
    fn boost_never_lowers_rank() {
        let (prepared, cfg, embedder) = setup(9);
        let t = task("unrelated request with no overlap", &embedder, &cfg);
        let (_, boosted) = match_communities(&t.embedding, &prepared, &cfg).unwrap();
        let retained = match_subunits(&t.embedding, &prepared, &cfg).unwrap();
        let l0 = project_l0(&retained, &prepared);
        let (l1, p) = skill_level_scores(&t.embedding, &t.tokens, &prepared).unwrap();
        let with_boost = rank_all(&l1, &l0, &p, &boosted, &prepared, &cfg);
        let rank_of: BTreeMap<&str, usize> = with_boost.iter().map(|s| (s.skill_id.as_str(), s.rank)).collect();
        let no_boost = rank_all(&l1, &l0, &p, &BTreeSet::new(), &prepared, &cfg);
        for s in &no_boost {
            if boosted.contains(&s.skill_id) {
                assert!(rank_of[s.skill_id.as_str()] <= s.rank);
            }
        }
    }

    #[test]
    fn equal_base_scores_boosted_skill_wins() {
        // Two skills with identical base; boosting one must rank it first.
        let (prepared, cfg, _) = setup(4);
        let ids: Vec<String> = prepared.graph.skills.iter().map(|s| s.skill_id.clone()).collect();
        let same: BTreeMap<String, f64> = ids.iter().map(|i| (i.clone(), 0.5)).collect();
        let zeros: BTreeMap<String, f64> = ids.iter().map(|i| (i.clone(), 0.0)).collect();
        let boosted: BTreeSet<String> = [ids[2].clone()].into();
        let ranking = rank_all(&same, &zeros, &zeros, &boosted, &prepared, &cfg);
        assert_eq!(ranking[0].skill_id, ids[2]);
        assert!(ranking[0].community_boosted);
    }

    #[test]
    fn selection_matches_brute_force_on_random_fixtures() {
        for seed in 0..20usize {
            let n = 5 + (seed * 7) % 20;
            let (prepared, cfg, embedder) = setup(n);
            let t = task(
                &format!(
                    "validate the {} output and export table {seed}",
                    ["citation", "audio", "deploy"][seed % 3]
                ),
                &embedder,
                &cfg,
            );
            let result = retrieve(&t, &prepared, &cfg).unwrap();

            // Oracle: recompute final scores directly and full-sort.
            let (_, boosted) = match_communities(&t.embedding, &prepared, &cfg).unwrap();
            let retained = match_subunits(&t.embedding, &prepared, &cfg).unwrap();
            let l0 = project_l0(&retained, &prepared);
            let (l1, p) = skill_level_scores(&t.embedding, &t.tokens, &prepared).unwrap();
            let mut oracle: Vec<(f64, String)> = prepared
                .graph
                .skills
                .iter()
                .map(|s| {
                    let base = cfg.retrieval.alpha * l1[&s.skill_id]
                        + cfg.retrieval.beta * l0[&s.skill_id]
                        + cfg.retrieval.gamma * p[&s.skill_id];
                    let boost = if boosted.contains(&s.skill_id) {
                        1.0 + cfg.retrieval.lambda
                    } else {
                        1.0
                    };
                    (base * boost, s.skill_id.clone())
                })
                .collect();
            oracle.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap().then(a.1.cmp(&b.1)));
            let want: Vec<String> = oracle
                .iter()
                .take(cfg.retrieval.top_k)
                .map(|(_, id)| id.clone())
                .collect();
            let got: Vec<String> = result.selected.iter().map(|s| s.skill_id.clone()).collect();
            assert_eq!(got, want, "seed {seed}");
        }
    }

    #[test]
    fn small_corpus_selects_everyone() {
        let (prepared, cfg, embedder) = setup(3);
        let t = task("any task", &embedder, &cfg);
        let result = retrieve(&t, &prepared, &cfg).unwrap();
        assert_eq!(result.selected.len(), 3);
    }

    #[test]
    fn highlights_ranked_capped_and_deduplicated() {
        let (prepared, cfg, embedder) = setup(12);
        let t = task(
            "always validate the citation output file and convert the citation source bundle",
            &embedder,
            &cfg,
        );
        let result = retrieve(&t, &prepared, &cfg).unwrap();
        for (skill_id, hs) in &result.highlights {
            assert!(hs.len() <= cfg.retrieval.max_highlights);
            let mut ids = BTreeSet::new();
            for h in hs {
                assert!(ids.insert(&h.subunit_id), "duplicate highlight");
                assert_eq!(&h.source_skill_id, skill_id);
                assert!(prepared.has_edge(skill_id, &h.subunit_id));
            }
            for pair in hs.windows(2) {
                assert!(
                    pair[0].contribution > pair[1].contribution
                        || (pair[0].contribution == pair[1].contribution && pair[0].sigma >= pair[1].sigma)
                );
            }
        }
    }

    #[test]
    fn highlight_lists_may_be_empty_without_error() {
        let (prepared, mut cfg, embedder) = setup(8);
        cfg.retrieval.top_subunits = 1; // starve most skills of retained subunits
        let t = task("completely unrelated request text", &embedder, &cfg);
        let result = retrieve(&t, &prepared, &cfg).unwrap();
        assert_eq!(result.highlights.len(), result.selected.len());
    }

    #[test]
    fn shared_subunit_may_appear_in_two_skills_highlights() {
        let (prepared, cfg, embedder) = setup(12);
        // The per-topic constraint line is shared by the two same-topic
        // skills; aim the task straight at it.
        let t = task("always validate the citation output file", &embedder, &cfg);
        let result = retrieve(&t, &prepared, &cfg).unwrap();
        let mut appearances: BTreeMap<&str, usize> = BTreeMap::new();
        for hs in result.highlights.values() {
            for h in hs {
                *appearances.entry(h.subunit_id.as_str()).or_insert(0) += 1;
            }
        }
        assert!(
            appearances.values().any(|&c| c >= 2),
            "expected a shared subunit highlighted under two skills: {appearances:?}"
        );
    }

    #[test]
    fn rescue_frontier_respects_bound_and_exclusion() {
        let (prepared, cfg, embedder) = setup(30);
        let t = task("export the audio summary table for case 7", &embedder, &cfg);
        let result = retrieve(&t, &prepared, &cfg).unwrap();
        let bound = 10usize.max(4 * cfg.retrieval.top_k);
        assert_eq!(result.rescue.len(), (30 - cfg.retrieval.top_k).min(bound));
        let selected: BTreeSet<String> = result.selected.iter().map(|s| s.skill_id.clone()).collect();
        for r in &result.rescue {
            assert!(!selected.contains(&r.parent_skill_id));
        }
        // Frontier membership matches the sort-oracle prefix of the
        // non-selected ranking.
        let (_, boosted) = match_communities(&t.embedding, &prepared, &cfg).unwrap();
        let retained = match_subunits(&t.embedding, &prepared, &cfg).unwrap();
        let l0 = project_l0(&retained, &prepared);
        let (l1, p) = skill_level_scores(&t.embedding, &t.tokens, &prepared).unwrap();
        let ranking = rank_all(&l1, &l0, &p, &boosted, &prepared, &cfg);
        let want: Vec<String> = ranking
            .iter()
            .filter(|s| !selected.contains(&s.skill_id))
            .take(bound)
            .map(|s| s.skill_id.clone())
            .collect();
        let got: Vec<String> = result.rescue.iter().map(|r| r.parent_skill_id.clone()).collect();
        assert_eq!(got, want);
    }

    #[test]
    fn six_skill_corpus_leaves_one_rescue_record() {
        let (prepared, cfg, embedder) = setup(6);
        let t = task("convert the spreadsheet source bundle", &embedder, &cfg);
        let result = retrieve(&t, &prepared, &cfg).unwrap();
        assert_eq!(result.selected.len(), 5);
        assert_eq!(result.rescue.len(), 1);
        // A single-record frontier normalizes to zero.
        assert_eq!(result.rescue[0].parent_score_normalized, 0.0);
    }

    #[test]
    fn retrieval_is_deterministic_bytes() {
        let (prepared, cfg, embedder) = setup(14);
        let t1 = task("validate the network output file", &embedder, &cfg);
        let t2 = task("validate the network output file", &embedder, &cfg);
        let a = serde_json::to_vec(&retrieve(&t1, &prepared, &cfg).unwrap()).unwrap();
        let b = serde_json::to_vec(&retrieve(&t2, &prepared, &cfg).unwrap()).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn rank_invariance_under_affine_rescaling() {
        // Min-max normalization is invariant to shifting or positively
        // scaling its raw inputs.
        let mut raw = BTreeMap::new();
        for (i, id) in ["a", "b", "c", "d"].iter().enumerate() {
            raw.insert(id.to_string(), 0.1 * i as f64);
        }
        let scaled: BTreeMap<String, f64> = raw.iter().map(|(k, v)| (k.clone(), 3.0 * v + 7.0)).collect();
        let n1 = min_max_normalize(&raw);
        let n2 = min_max_normalize(&scaled);
        for k in raw.keys() {
            assert!((n1[k] - n2[k]).abs() < 1e-12);
        }
    }
}
