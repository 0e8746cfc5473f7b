//! Brute-force ranking oracle: recomputes the full retrieval scoring with
//! naive nested loops, edge-list scans, and full sorts. Shares nothing
//! with the optimized path except the input graph, the embedder, and the
//! tie-break rule, so agreement is meaningful.

use std::collections::BTreeSet;

use crate::config::SkillForgeConfig;
use crate::embedding::cosine_similarity;
use crate::error::Result;
use crate::graph::PreparedGraph;
use crate::retrieval::{PreparedTask, ScoredSkill};
use crate::text::{jaccard, token_set};

pub fn brute_force_rank(
    task: &PreparedTask,
    prepared: &PreparedGraph,
    cfg: &SkillForgeConfig,
) -> Result<Vec<ScoredSkill>> {
    let graph = &prepared.graph;

    // Top-down: score every community, full sort, union the members of
    // the best ones.
    let mut community_scores: Vec<(f64, u32)> = Vec::new();
    for c in &graph.communities {
        community_scores.push((cosine_similarity(&task.embedding, &c.community_text_embedding)?, c.community_id));
    }
    community_scores.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap_or(std::cmp::Ordering::Equal).then(a.1.cmp(&b.1)));
    let mut boosted: BTreeSet<String> = BTreeSet::new();
    for (_, id) in community_scores.iter().take(cfg.retrieval.top_communities) {
        for c in &graph.communities {
            if c.community_id == *id {
                for m in &c.member_skill_ids {
                    boosted.insert(m.clone());
                }
            }
        }
    }

    // Bottom-up: sigma for every subunit, full sort, retain N.
    let mut sigmas: Vec<(String, f64)> = Vec::new();
    for u in &graph.subunits {
        sigmas.push((
            u.subunit_id.clone(),
            cosine_similarity(&task.embedding, &graph.subunit_embeddings[&u.subunit_id])?,
        ));
    }
    sigmas.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap_or(std::cmp::Ordering::Equal).then(a.0.cmp(&b.0)));
    sigmas.truncate(cfg.retrieval.top_subunits);

    // Degrees by scanning the edge list.
    let degree = |subunit_id: &str| -> usize {
        graph.edges.iter().filter(|e| e.subunit_id == subunit_id).count()
    };

    // Raw projection: double loop over (skill, retained subunit).
    let mut l0_raw: Vec<(String, f64, bool)> = Vec::new(); // (skill, raw, has_candidates)
    for s in &graph.skills {
        let mut acc = 0.0;
        let mut any = false;
        for (u, sigma) in &sigmas {
            let connected = graph.edges.iter().any(|e| e.skill_id == s.skill_id && &e.subunit_id == u);
            if connected {
                acc += sigma / degree(u) as f64;
                any = true;
            }
        }
        l0_raw.push((s.skill_id.clone(), acc, any));
    }
    let candidates: Vec<f64> = l0_raw.iter().filter(|(_, _, any)| *any).map(|(_, v, _)| *v).collect();
    let (min, max) = bounds(&candidates);
    let l0 = |raw: f64, any: bool| -> f64 {
        if !any || max - min <= 0.0 {
            0.0
        } else {
            (raw - min) / (max - min)
        }
    };

    // Skill-level scores with explicit min/max scans.
    let task_tokens = token_set(&task.request.text);
    let mut l1_raw = Vec::new();
    let mut p_raw = Vec::new();
    for s in &graph.skills {
        l1_raw.push(cosine_similarity(&task.embedding, &graph.skill_desc_embeddings[&s.skill_id])?);
        p_raw.push(jaccard(&task_tokens, &token_set(&s.name)));
    }
    let (l1_min, l1_max) = bounds(&l1_raw);
    let (p_min, p_max) = bounds(&p_raw);
    let norm = |v: f64, min: f64, max: f64| if max - min > 0.0 { (v - min) / (max - min) } else { 0.0 };

    let r = &cfg.retrieval;
    let mut scored: Vec<ScoredSkill> = graph
        .skills
        .iter()
        .enumerate()
        .map(|(i, s)| {
            let (_, raw, any) = &l0_raw[i];
            let l0v = l0(*raw, *any);
            let l1v = norm(l1_raw[i], l1_min, l1_max);
            let pv = norm(p_raw[i], p_min, p_max);
            let in_boost = boosted.contains(&s.skill_id);
            let base = r.alpha * l1v + r.beta * l0v + r.gamma * pv;
            ScoredSkill {
                skill_id: s.skill_id.clone(),
                l1: l1v,
                l0: l0v,
                name_score: pv,
                community_boosted: in_boost,
                final_score: base * (1.0 + r.lambda * f64::from(u8::from(in_boost))),
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
    Ok(scored)
}

fn bounds(values: &[f64]) -> (f64, f64) {
    let mut min = f64::INFINITY;
    let mut max = f64::NEG_INFINITY;
    for v in values {
        if *v < min {
            min = *v;
        }
        if *v > max {
            max = *v;
        }
    }
    (min, max)
}
