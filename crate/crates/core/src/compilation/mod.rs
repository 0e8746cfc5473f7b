//! Context compilation: rescue high-relevance subunits from non-selected
//! skills, attach each one to its most compatible selected skill, gate
//! the attached cues, and render everything into a budget-bounded packet.
//! The packet has two file forms, READ_FIRST.md (markdown) and
//! COORDINATOR_PACKET.json (machine mirror), both byte-deterministic.
//! Compilation never mutates the graph or the retrieval result.

mod affiliate;
mod contract;
mod render;
mod rescue;

pub use affiliate::{affiliate_score, attach, replay_score, weighted_score, AffiliateFeatures};
pub use contract::extract_output_contract;
pub use render::{render_packet_json, render_read_first, PACKET_SCHEMA_VERSION};
pub use rescue::filter_rescue;

use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

use crate::config::SkillForgeConfig;
use crate::error::{Error, Result};
use crate::graph::PreparedGraph;
use crate::retrieval::{PreparedTask, RetrievalResult, SubunitHighlight};
use crate::subunits::SubunitKind;
use crate::text::{token_count, token_jaccard, truncate_tokens};

/// A subunit recovered from a non-selected source skill (an element of
/// the intermediate rescue set).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RescuedSubunit {
    pub subunit_id: String,
    pub text: String,
    pub sigma: f64,
    pub parent_skill_id: String,
    /// Frontier-normalized score of the parent.
    pub parent_score: f64,
}

/// A rescued subunit attached to its most compatible selected skill.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AffiliatedCue {
    pub subunit_id: String,
    pub text: String,
    pub attached_skill_id: String,
    pub parent_skill_id: String,
    /// Weighted feature score plus exclusivity bonus minus the
    /// out-of-active-group penalty.
    pub aff_score: f64,
    pub features: AffiliateFeatures,
    pub exclusivity_bonus_applied: bool,
    pub accepted: bool,
    /// (skill_id, raw weighted score) for every selected skill, audit
    /// trail for the argmax.
    pub candidate_scores: Vec<(String, f64)>,
}

/// Expected files, formats, and constraint lines scanned from the task
/// text. Never invented; possibly empty.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct OutputContract {
    pub expected_files: Vec<String>,
    pub expected_formats: Vec<String>,
    pub constraint_lines: Vec<String>,
}

impl OutputContract {
    pub fn is_empty(&self) -> bool {
        self.expected_files.is_empty() && self.expected_formats.is_empty() && self.constraint_lines.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SectionKind {
    Task,
    SelectedSkills,
    OutputContract,
    Highlights,
    AffiliatedCues,
    Checklist,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Section {
    pub kind: SectionKind,
    pub rendered_text: String,
    pub token_count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DroppedItem {
    pub section: SectionKind,
    pub item_id: String,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectedSkillSummary {
    pub skill_id: String,
    pub name: String,
    pub score: f64,
    pub rank: usize,
    /// Highlights that survived budget enforcement, render order.
    pub highlights: Vec<SubunitHighlight>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompiledContext {
    pub task_id: String,
    /// Non-empty sections in fixed priority order.
    pub sections: Vec<Section>,
    pub total_tokens: usize,
    pub budget: usize,
    /// Every input item that is not rendered appears here with a reason.
    pub dropped: Vec<DroppedItem>,
    pub selected: Vec<SelectedSkillSummary>,
    /// All attached cues; `accepted` marks the rendered ones.
    pub cues: Vec<AffiliatedCue>,
    /// The contract as rendered (after any budget drops).
    pub contract: OutputContract,
    pub checklist: Vec<String>,
}

pub(crate) fn count_tokens(text: &str, cfg: &SkillForgeConfig) -> usize {
    match cfg.compile.approx_chars_per_token {
        Some(n) if n > 0 => text.chars().count().div_ceil(n),
        _ => token_count(text),
    }
}

fn one_line(description: &str, max_tokens: usize) -> String {
    let first_line = description.lines().next().unwrap_or("");
    truncate_tokens(first_line, max_tokens)
}

struct Item {
    id: String,
    line: String,
    // Ordering key for budget drops: higher = kept longer.
    score: f64,
    tie: f64,
}

fn section_text(header: &str, lines: &[String]) -> String {
    let mut out = String::from(header);
    for l in lines {
        out.push('\n');
        out.push_str(l);
    }
    out
}

/// Assemble the packet. Sections render in fixed priority order; cues are
/// gated against the optional-cue budget (what remains of the budget
/// after the task, skills, contract, and highlight sections); whole items
/// drop lowest-priority-section first until the hard budget holds.
pub fn compile_context(
    task: &PreparedTask,
    retrieval: &RetrievalResult,
    mut cues: Vec<AffiliatedCue>,
    contract: OutputContract,
    prepared: &PreparedGraph,
    cfg: &SkillForgeConfig,
) -> Result<CompiledContext> {
    let budget = cfg.compile.budget_tokens;
    let mut dropped: Vec<DroppedItem> = Vec::new();

    // Section 1: task digest.
    let digest = truncate_tokens(&task.request.text, cfg.compile.task_digest_tokens);
    let s1 = section_text("## Task", &[digest]);

    // Section 2: selected skills, rank order.
    let skill_lines: Vec<String> = retrieval
        .selected
        .iter()
        .map(|s| {
            let node = prepared.skill(&s.skill_id);
            let name = node.map(|n| n.name.as_str()).unwrap_or(s.skill_id.as_str());
            let desc = node.map(|n| one_line(&n.description, cfg.compile.skill_line_tokens)).unwrap_or_default();
            format!("{}. {}: {}", s.rank, name, desc)
        })
        .collect();
    let s2 = section_text("## Selected skills", &skill_lines);

    let fixed = count_tokens(&s1, cfg) + count_tokens(&s2, cfg);
    if fixed > budget {
        return Err(Error::BudgetInfeasible {
            required: fixed,
            budget,
        });
    }

    // Section 3: output contract.
    let mut contract_items: Vec<Item> = Vec::new();
    for f in &contract.expected_files {
        contract_items.push(Item {
            id: format!("file:{f}"),
            line: format!("- expected file: {f}"),
            score: 0.0,
            tie: 0.0,
        });
    }
    for f in &contract.expected_formats {
        contract_items.push(Item {
            id: format!("format:{f}"),
            line: format!("- expected format: {f}"),
            score: 0.0,
            tie: 0.0,
        });
    }
    for (i, c) in contract.constraint_lines.iter().enumerate() {
        contract_items.push(Item {
            id: format!("constraint:{i}"),
            line: format!("- constraint: {c}"),
            score: 0.0,
            tie: 0.0,
        });
    }

    // Section 4: highlights, selected-skill rank order.
    let mut highlight_items: Vec<Item> = Vec::new();
    for s in &retrieval.selected {
        if let Some(hs) = retrieval.highlights.get(&s.skill_id) {
            for h in hs {
                highlight_items.push(Item {
                    id: format!("{}:{}", s.skill_id, h.subunit_id),
                    line: format!("- [{}] {}", s.skill_id, h.text),
                    score: h.contribution,
                    tie: h.sigma,
                });
            }
        }
    }

    let render_contract = |items: &[Item]| -> Option<String> {
        (!items.is_empty()).then(|| {
            section_text(
                "## Output contract",
                &items.iter().map(|i| i.line.clone()).collect::<Vec<_>>(),
            )
        })
    };
    let render_highlights = |items: &[Item]| -> Option<String> {
        (!items.is_empty()).then(|| {
            section_text(
                "## Highlights",
                &items.iter().map(|i| i.line.clone()).collect::<Vec<_>>(),
            )
        })
    };

    let s3 = render_contract(&contract_items);
    let s4 = render_highlights(&highlight_items);
    let used_before_cues = fixed
        + s3.as_deref().map(|t| count_tokens(t, cfg)).unwrap_or(0)
        + s4.as_deref().map(|t| count_tokens(t, cfg)).unwrap_or(0);
    let optional_cue_budget = budget.saturating_sub(used_before_cues);

    // Step 3 gating: concrete, task-aligned, non-redundant, above the
    // affiliation threshold, and within the optional-cue budget.
    let highlight_texts: Vec<&str> = retrieval
        .highlights
        .values()
        .flatten()
        .map(|h| h.text.as_str())
        .collect();
    cues.sort_by(|a, b| {
        b.aff_score
            .partial_cmp(&a.aff_score)
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(a.subunit_id.cmp(&b.subunit_id))
    });
    let cue_header_tokens = count_tokens("## Affiliated cues", cfg);
    let mut cue_tokens_used = 0usize;
    let mut accepted_ids: Vec<String> = Vec::new();
    let mut accepted_texts: Vec<String> = Vec::new();
    for cue in &mut cues {
        let reason = gate_reason(
            cue,
            &highlight_texts,
            &accepted_texts,
            prepared,
            cfg,
            optional_cue_budget,
            cue_header_tokens,
            &mut cue_tokens_used,
        );
        match reason {
            None => {
                cue.accepted = true;
                accepted_ids.push(cue.subunit_id.clone());
                accepted_texts.push(cue.text.clone());
            }
            Some(reason) => {
                cue.accepted = false;
                dropped.push(DroppedItem {
                    section: SectionKind::AffiliatedCues,
                    item_id: cue.subunit_id.clone(),
                    reason,
                });
            }
        }
    }

    let cue_line = |cue: &AffiliatedCue| {
        format!(
            "- {} (supports {}; from {})",
            cue.text, cue.attached_skill_id, cue.parent_skill_id
        )
    };
    let mut cue_items: Vec<Item> = cues
        .iter()
        .filter(|c| c.accepted)
        .map(|c| Item {
            id: c.subunit_id.clone(),
            line: cue_line(c),
            score: c.aff_score,
            tie: 0.0,
        })
        .collect();

    // Section 6: execution checklist.
    let mut checklist_lines: Vec<String> = vec!["- Read the selected skills in rank order before acting.".to_string()];
    if !contract.expected_files.is_empty() {
        checklist_lines.push(format!(
            "- Produce the expected files: {}.",
            contract.expected_files.join(", ")
        ));
    }
    if !contract.expected_formats.is_empty() {
        checklist_lines.push(format!(
            "- Keep outputs in the expected formats: {}.",
            contract.expected_formats.join(", ")
        ));
    }
    if !contract.constraint_lines.is_empty() {
        checklist_lines.push("- Respect every constraint listed in the output contract.".to_string());
    }
    checklist_lines.push("- Verify each output artifact before finishing.".to_string());
    let mut checklist_items: Vec<Item> = checklist_lines
        .iter()
        .enumerate()
        .map(|(i, l)| Item {
            id: format!("checklist:{i}"),
            line: l.clone(),
            score: -(i as f64),
            tie: 0.0,
        })
        .collect();

    let mut contract_items = contract_items;
    let mut highlight_items = highlight_items;

    let assemble = |contract_items: &[Item], highlight_items: &[Item], cue_items: &[Item], checklist_items: &[Item], cfg: &SkillForgeConfig| -> Vec<Section> {
        let mut sections = Vec::new();
        let mut push = |kind: SectionKind, text: Option<String>, cfg: &SkillForgeConfig| {
            if let Some(text) = text {
                let token_count = count_tokens(&text, cfg);
                sections.push(Section {
                    kind,
                    rendered_text: text,
                    token_count,
                });
            }
        };
        push(SectionKind::Task, Some(s1.clone()), cfg);
        push(SectionKind::SelectedSkills, Some(s2.clone()), cfg);
        push(SectionKind::OutputContract, render_contract(contract_items), cfg);
        push(SectionKind::Highlights, render_highlights(highlight_items), cfg);
        push(
            SectionKind::AffiliatedCues,
            (!cue_items.is_empty()).then(|| {
                section_text(
                    "## Affiliated cues",
                    &cue_items.iter().map(|i| i.line.clone()).collect::<Vec<_>>(),
                )
            }),
            cfg,
        );
        push(
            SectionKind::Checklist,
            (!checklist_items.is_empty()).then(|| {
                section_text(
                    "## Checklist",
                    &checklist_items.iter().map(|i| i.line.clone()).collect::<Vec<_>>(),
                )
            }),
            cfg,
        );
        sections
    };

    // Budget enforcement: drop whole items, lowest-priority section first,
    // lowest score first within a section.
    loop {
        let sections = assemble(&contract_items, &highlight_items, &cue_items, &checklist_items, cfg);
        let total: usize = sections.iter().map(|s| s.token_count).sum();
        if total <= budget {
            break;
        }
        let dropped_one = drop_worst(&mut cue_items, SectionKind::AffiliatedCues, &mut dropped)
            || drop_worst(&mut highlight_items, SectionKind::Highlights, &mut dropped)
            || drop_worst(&mut checklist_items, SectionKind::Checklist, &mut dropped)
            || drop_worst(&mut contract_items, SectionKind::OutputContract, &mut dropped);
        if !dropped_one {
            // Only the task and skill sections remain; they fit by the
            // infeasibility check above.
            break;
        }
    }

    let sections = assemble(&contract_items, &highlight_items, &cue_items, &checklist_items, cfg);
    let total_tokens: usize = sections.iter().map(|s| s.token_count).sum();

    // Sync accepted flags with budget survivors.
    let surviving_cues: Vec<String> = cue_items.iter().map(|i| i.id.clone()).collect();
    for cue in &mut cues {
        if cue.accepted && !surviving_cues.contains(&cue.subunit_id) {
            cue.accepted = false;
        }
    }

    // Post-drop structured mirrors of the rendered sections.
    let surviving_highlights: Vec<&str> = highlight_items.iter().map(|i| i.id.as_str()).collect();
    let selected: Vec<SelectedSkillSummary> = retrieval
        .selected
        .iter()
        .map(|s| {
            let node = prepared.skill(&s.skill_id);
            let highlights = retrieval
                .highlights
                .get(&s.skill_id)
                .map(|hs| {
                    hs.iter()
                        .filter(|h| surviving_highlights.contains(&format!("{}:{}", s.skill_id, h.subunit_id).as_str()))
                        .cloned()
                        .collect()
                })
                .unwrap_or_default();
            SelectedSkillSummary {
                skill_id: s.skill_id.clone(),
                name: node.map(|n| n.name.clone()).unwrap_or_else(|| s.skill_id.clone()),
                score: s.final_score,
                rank: s.rank,
                highlights,
            }
        })
        .collect();

    let contract = OutputContract {
        expected_files: contract
            .expected_files
            .iter()
            .filter(|f| contract_items.iter().any(|i| i.id == format!("file:{f}")))
            .cloned()
            .collect(),
        expected_formats: contract
            .expected_formats
            .iter()
            .filter(|f| contract_items.iter().any(|i| i.id == format!("format:{f}")))
            .cloned()
            .collect(),
        constraint_lines: contract
            .constraint_lines
            .iter()
            .enumerate()
            .filter(|(i, _)| contract_items.iter().any(|it| it.id == format!("constraint:{i}")))
            .map(|(_, c)| c.clone())
            .collect(),
    };

    Ok(CompiledContext {
        task_id: task.request.task_id.clone(),
        sections,
        total_tokens,
        budget,
        dropped,
        selected,
        cues,
        contract,
        checklist: checklist_items.iter().map(|i| i.line.clone()).collect(),
    })
}

/// Gate check for one cue; `None` means accepted. Mutates the running
/// cue-token tally only on acceptance.
#[allow(clippy::too_many_arguments)]
fn gate_reason(
    cue: &AffiliatedCue,
    highlight_texts: &[&str],
    accepted_texts: &[String],
    prepared: &PreparedGraph,
    cfg: &SkillForgeConfig,
    optional_cue_budget: usize,
    header_tokens: usize,
    cue_tokens_used: &mut usize,
) -> Option<String> {
    if cue.aff_score < cfg.affiliate.affiliation_threshold {
        return Some("below_affiliation_threshold".to_string());
    }
    let kind = prepared.subunit(&cue.subunit_id).map(|u| u.kind);
    let concrete = matches!(kind, Some(SubunitKind::Element) | Some(SubunitKind::Constraint))
        || crate::subunits::contains_element_token(&cue.text);
    if !concrete {
        return Some("not_concrete".to_string());
    }
    if cue.features.q_rel <= 0.0 {
        return Some("not_task_aligned".to_string());
    }
    for h in highlight_texts {
        if token_jaccard(&cue.text, h) >= cfg.rescue.redundancy_jaccard {
            return Some("redundant_with_highlight".to_string());
        }
    }
    for t in accepted_texts {
        if token_jaccard(&cue.text, t) >= cfg.rescue.redundancy_jaccard {
            return Some("redundant_with_cue".to_string());
        }
    }
    let line = format!(
        "- {} (supports {}; from {})",
        cue.text, cue.attached_skill_id, cue.parent_skill_id
    );
    let line_tokens = count_tokens(&line, cfg);
    let header = if *cue_tokens_used == 0 { header_tokens } else { 0 };
    if *cue_tokens_used + header + line_tokens > optional_cue_budget {
        return Some("over_cue_budget".to_string());
    }
    *cue_tokens_used += header + line_tokens;
    None
}

fn drop_worst(items: &mut Vec<Item>, section: SectionKind, dropped: &mut Vec<DroppedItem>) -> bool {
    if items.is_empty() {
        return false;
    }
    let mut worst = 0usize;
    for i in 1..items.len() {
        let a = &items[i];
        let b = &items[worst];
        let worse = a
            .score
            .partial_cmp(&b.score)
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(a.tie.partial_cmp(&b.tie).unwrap_or(std::cmp::Ordering::Equal))
            .then(b.id.cmp(&a.id));
        if worse == std::cmp::Ordering::Less {
            worst = i;
        }
    }
    let item = items.remove(worst);
    dropped.push(DroppedItem {
        section,
        item_id: item.id,
        reason: "over_budget".to_string(),
    });
    true
}

/// Run the whole compilation stage for one task: rescue filtering,
/// affiliate attachment, contract extraction (unless a structured
/// contract is injected), gating, and budget-bounded assembly.
pub fn compile(
    task: &PreparedTask,
    retrieval: &RetrievalResult,
    prepared: &PreparedGraph,
    cfg: &SkillForgeConfig,
    contract_override: Option<OutputContract>,
) -> Result<CompiledContext> {
    let rescued = filter_rescue(&retrieval.rescue, &retrieval.highlights, prepared, cfg);
    let cues = attach(&rescued, &retrieval.selected, &retrieval.highlights, prepared, task, cfg);
    let contract = match contract_override {
        Some(c) => c,
        None => extract_output_contract(&task.request.text, cfg),
    };
    compile_context(task, retrieval, cues, contract, prepared, cfg)
}

/// Lite compilation: same budget machinery with no highlights and no
/// cues; renders selected skills, the contract, and the checklist only.
pub fn lite_compile(
    task: &PreparedTask,
    retrieval: &RetrievalResult,
    prepared: &PreparedGraph,
    cfg: &SkillForgeConfig,
    contract_override: Option<OutputContract>,
) -> Result<CompiledContext> {
    let mut stripped = retrieval.clone();
    stripped.highlights = BTreeMap::new();
    let contract = match contract_override {
        Some(c) => c,
        None => extract_output_contract(&task.request.text, cfg),
    };
    compile_context(task, &stripped, Vec::new(), contract, prepared, cfg)
}
