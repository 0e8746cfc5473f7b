//! The two file forms of a compiled context: READ_FIRST.md (the section
//! texts, in order) and COORDINATOR_PACKET.json (a versioned machine
//! mirror with stable key order). Both are byte-deterministic functions
//! of the compiled context.

use serde::{Deserialize, Serialize};

use super::CompiledContext;
use crate::error::Result;

pub const PACKET_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Packet {
    pub schema: u32,
    pub task_id: String,
    pub selected_skills: Vec<PacketSkill>,
    pub output_contract: PacketContract,
    pub affiliated_cues: Vec<PacketCue>,
    pub budget: PacketBudget,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PacketSkill {
    pub id: String,
    pub name: String,
    pub score: f64,
    pub highlights: Vec<PacketHighlight>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PacketHighlight {
    pub subunit_id: String,
    pub text: String,
    pub sigma: f64,
    pub contribution: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PacketContract {
    pub expected_files: Vec<String>,
    pub expected_formats: Vec<String>,
    pub constraint_lines: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PacketCue {
    pub text: String,
    pub attached_skill: String,
    pub source_skill: String,
    pub aff_score: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PacketBudget {
    pub limit: usize,
    pub total: usize,
    pub dropped: Vec<PacketDrop>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PacketDrop {
    pub section: String,
    pub item_id: String,
    pub reason: String,
}

/// Markdown form: the rendered sections in priority order.
pub fn render_read_first(ctx: &CompiledContext) -> String {
    let mut out = String::new();
    for (i, section) in ctx.sections.iter().enumerate() {
        if i > 0 {
            out.push_str("\n\n");
        }
        out.push_str(&section.rendered_text);
    }
    out.push('\n');
    out
}

pub fn packet_from_context(ctx: &CompiledContext) -> Packet {
    Packet {
        schema: PACKET_SCHEMA_VERSION,
        task_id: ctx.task_id.clone(),
        selected_skills: ctx
            .selected
            .iter()
            .map(|s| PacketSkill {
                id: s.skill_id.clone(),
                name: s.name.clone(),
                score: s.score,
                highlights: s
                    .highlights
                    .iter()
                    .map(|h| PacketHighlight {
                        subunit_id: h.subunit_id.clone(),
                        text: h.text.clone(),
                        sigma: h.sigma,
                        contribution: h.contribution,
                    })
                    .collect(),
            })
            .collect(),
        output_contract: PacketContract {
            expected_files: ctx.contract.expected_files.clone(),
            expected_formats: ctx.contract.expected_formats.clone(),
            constraint_lines: ctx.contract.constraint_lines.clone(),
        },
        affiliated_cues: ctx
            .cues
            .iter()
            .filter(|c| c.accepted)
            .map(|c| PacketCue {
                text: c.text.clone(),
                attached_skill: c.attached_skill_id.clone(),
                source_skill: c.parent_skill_id.clone(),
                aff_score: c.aff_score,
            })
            .collect(),
        budget: PacketBudget {
            limit: ctx.budget,
            total: ctx.total_tokens,
            dropped: ctx
                .dropped
                .iter()
                .map(|d| PacketDrop {
                    section: format!("{:?}", d.section).to_lowercase(),
                    item_id: d.item_id.clone(),
                    reason: d.reason.clone(),
                })
                .collect(),
        },
    }
}

/// JSON form, pretty-printed with stable key order.
pub fn render_packet_json(ctx: &CompiledContext) -> Result<String> {
    let packet = packet_from_context(ctx);
    let mut json = serde_json::to_string_pretty(&packet)?;
    json.push('\n');
    Ok(json)
}
