//! Step 1 of compilation: pick a small set of subunits from non-selected
//! source skills, under the parent-score and subunit-score thresholds,
//! token-Jaccard redundancy filtering, a per-parent cap, and a global cap.

use std::collections::BTreeMap;

use super::RescuedSubunit;
use crate::config::SkillForgeConfig;
use crate::graph::PreparedGraph;
use crate::retrieval::{RescueCandidateRecord, SubunitHighlight};
use crate::text::token_jaccard;

/// Scan the rescue frontier (best parents first) and keep subunits that
/// clear both thresholds and are not redundant with any selected-skill
/// highlight or an already-kept rescue. Each kept subunit remembers its
/// non-selected source skill.
pub fn filter_rescue(
    records: &[RescueCandidateRecord],
    highlights: &BTreeMap<String, Vec<SubunitHighlight>>,
    prepared: &PreparedGraph,
    cfg: &SkillForgeConfig,
) -> Vec<RescuedSubunit> {
    let r = &cfg.rescue;
    let highlight_texts: Vec<&str> = highlights.values().flatten().map(|h| h.text.as_str()).collect();

    let mut ordered: Vec<&RescueCandidateRecord> = records.iter().collect();
    ordered.sort_by(|a, b| {
        b.parent_score_normalized
            .partial_cmp(&a.parent_score_normalized)
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(a.parent_skill_id.cmp(&b.parent_skill_id))
    });

    let mut kept: Vec<RescuedSubunit> = Vec::new();
    for record in ordered {
        if kept.len() >= r.global_cap {
            break;
        }
        if record.parent_score_normalized < r.parent_threshold {
            continue;
        }
        let mut from_this_parent = 0usize;
        for (subunit_id, sigma) in &record.candidate_subunits {
            if kept.len() >= r.global_cap || from_this_parent >= r.per_parent_cap {
                break;
            }
            if *sigma < r.subunit_threshold {
                continue;
            }
            let Some(subunit) = prepared.subunit(subunit_id) else {
                continue;
            };
            let redundant = kept
                .iter()
                .any(|k| token_jaccard(&subunit.text, &k.text) >= r.redundancy_jaccard)
                || highlight_texts
                    .iter()
                    .any(|h| token_jaccard(&subunit.text, h) >= r.redundancy_jaccard);
            if redundant {
                continue;
            }
            kept.push(RescuedSubunit {
                subunit_id: subunit_id.clone(),
                text: subunit.text.clone(),
                sigma: *sigma,
                parent_skill_id: record.parent_skill_id.clone(),
                parent_score: record.parent_score_normalized,
            });
            from_this_parent += 1;
        }
    }
    kept
}
