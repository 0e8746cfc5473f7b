//! Step 2 of compilation: attach each rescued subunit to the selected
//! skill with the highest deterministic compatibility score, a fixed
//! weighted combination of five features, with an exclusivity bonus for
//! clear winners and a penalty for cues outside the active communities.

use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

use super::{AffiliatedCue, RescuedSubunit};
use crate::config::SkillForgeConfig;
use crate::graph::PreparedGraph;
use crate::retrieval::{PreparedTask, ScoredSkill, SubunitHighlight};
use crate::text::token_jaccard;

/// The five compatibility features, each in [0, 1].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AffiliateFeatures {
    /// Token overlap between the rescued subunit and the task request.
    pub q_rel: f64,
    /// Best overlap with the skill profile or any of its highlights.
    pub f_skill: f64,
    /// Min-max normalized retrieval confidence of the selected skill.
    pub r_sel: f64,
    /// Source and candidate skill share a community.
    pub g_same: f64,
    /// Source skill's community is among the selected skills' communities.
    pub g_active: f64,
}

impl AffiliateFeatures {
    pub fn as_array(&self) -> [f64; 5] {
        [self.q_rel, self.f_skill, self.r_sel, self.g_same, self.g_active]
    }
}

/// Plain left-to-right dot product of weights and features.
pub fn weighted_score(features: &AffiliateFeatures, weights: &[f64; 5]) -> f64 {
    weights
        .iter()
        .zip(features.as_array())
        .map(|(w, f)| w * f)
        .sum()
}

fn selection_confidence(selected: &[ScoredSkill]) -> BTreeMap<String, f64> {
    let scores: BTreeMap<String, f64> = selected
        .iter()
        .map(|s| (s.skill_id.clone(), s.final_score))
        .collect();
    crate::retrieval::min_max_normalize(&scores)
}

/// Compatibility between one rescued subunit and one selected skill.
/// Returns the raw weighted score together with the feature values.
pub fn affiliate_score(
    rescued: &RescuedSubunit,
    candidate: &ScoredSkill,
    candidate_highlights: &[SubunitHighlight],
    selected: &[ScoredSkill],
    prepared: &PreparedGraph,
    task: &PreparedTask,
    cfg: &SkillForgeConfig,
) -> (f64, AffiliateFeatures) {
    let confidence = selection_confidence(selected);
    let features = compute_features(
        rescued,
        candidate,
        candidate_highlights,
        &confidence,
        selected,
        prepared,
        task,
    );
    (weighted_score(&features, &cfg.affiliate.weights), features)
}

fn compute_features(
    rescued: &RescuedSubunit,
    candidate: &ScoredSkill,
    candidate_highlights: &[SubunitHighlight],
    confidence: &BTreeMap<String, f64>,
    selected: &[ScoredSkill],
    prepared: &PreparedGraph,
    task: &PreparedTask,
) -> AffiliateFeatures {
    let q_rel = token_jaccard(&rescued.text, &task.request.text);

    let profile = prepared
        .skill(&candidate.skill_id)
        .map(|s| s.representation_text.clone())
        .unwrap_or_default();
    let mut f_skill = token_jaccard(&rescued.text, &profile);
    for h in candidate_highlights {
        f_skill = f_skill.max(token_jaccard(&rescued.text, &h.text));
    }

    let r_sel = confidence.get(&candidate.skill_id).copied().unwrap_or(0.0);

    let parent_community = prepared.community_of(&rescued.parent_skill_id);
    let candidate_community = prepared.community_of(&candidate.skill_id);
    let g_same = f64::from(u8::from(
        parent_community.is_some() && parent_community == candidate_community,
    ));
    let active = selected
        .iter()
        .filter_map(|s| prepared.community_of(&s.skill_id))
        .any(|c| Some(c) == parent_community);
    let g_active = f64::from(u8::from(active));

    AffiliateFeatures {
        q_rel,
        f_skill,
        r_sel,
        g_same,
        g_active,
    }
}

/// Attach every rescued subunit to its argmax selected skill. The bonus
/// applies only when at least two candidates exist and the winner leads
/// by the configured gap; the penalty applies when the cue's source skill
/// sits outside the active communities.
pub fn attach(
    rescued: &[RescuedSubunit],
    selected: &[ScoredSkill],
    highlights: &BTreeMap<String, Vec<SubunitHighlight>>,
    prepared: &PreparedGraph,
    task: &PreparedTask,
    cfg: &SkillForgeConfig,
) -> Vec<AffiliatedCue> {
    if selected.is_empty() {
        if !rescued.is_empty() {
            log::warn!("no selected skills; dropping {} rescued subunits", rescued.len());
        }
        return Vec::new();
    }
    let confidence = selection_confidence(selected);
    let empty: Vec<SubunitHighlight> = Vec::new();

    rescued
        .iter()
        .map(|u| {
            let mut candidate_scores: Vec<(String, f64, AffiliateFeatures)> = selected
                .iter()
                .map(|s| {
                    let hs = highlights.get(&s.skill_id).unwrap_or(&empty);
                    let features = compute_features(u, s, hs, &confidence, selected, prepared, task);
                    (
                        s.skill_id.clone(),
                        weighted_score(&features, &cfg.affiliate.weights),
                        features,
                    )
                })
                .collect();
            candidate_scores.sort_by(|a, b| {
                b.1.partial_cmp(&a.1)
                    .unwrap_or(std::cmp::Ordering::Equal)
                    .then(a.0.cmp(&b.0))
            });

            let (best_id, best_score, best_features) = candidate_scores[0].clone();
            let second_best = candidate_scores.get(1).map(|c| c.1);
            let bonus_applies = match second_best {
                Some(second) => best_score - second >= cfg.affiliate.exclusivity_gap,
                None => false,
            };
            let mut aff_score = best_score;
            if bonus_applies {
                aff_score += cfg.affiliate.exclusivity_bonus;
            }
            if best_features.g_active == 0.0 {
                aff_score -= cfg.affiliate.inactive_group_penalty;
            }

            AffiliatedCue {
                subunit_id: u.subunit_id.clone(),
                text: u.text.clone(),
                attached_skill_id: best_id,
                parent_skill_id: u.parent_skill_id.clone(),
                aff_score,
                features: best_features,
                exclusivity_bonus_applied: bonus_applies,
                accepted: false,
                candidate_scores: candidate_scores.into_iter().map(|(id, s, _)| (id, s)).collect(),
            }
        })
        .collect()
}

/// Recompute a cue's score from its stored features and flags; the audit
/// check behind the score-consistency invariant.
pub fn replay_score(cue: &AffiliatedCue, cfg: &SkillForgeConfig) -> f64 {
    let mut score = weighted_score(&cue.features, &cfg.affiliate.weights);
    if cue.exclusivity_bonus_applied {
        score += cfg.affiliate.exclusivity_bonus;
    }
    if cue.features.g_active == 0.0 {
        score -= cfg.affiliate.inactive_group_penalty;
    }
    score
}
