//! Seeded synthetic fixtures: topic-structured skill corpora and tasks
//! with known-relevant (planted) gold skills and subunits. Tasks sample a
//! gold skill's subunits and paraphrase them by deterministic token
//! substitution, so relevance is known without any model in the loop.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::path::Path;

use crate::corpus::SkillDocument;
use crate::error::Result;
use crate::graph::PreparedGraph;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SyntheticTask {
    pub task_id: String,
    pub text: String,
    pub gold_skill_ids: Vec<String>,
    pub gold_subunit_ids: Vec<String>,
    pub expected_files: Vec<String>,
    pub expected_formats: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TaskSet {
    pub tasks: Vec<SyntheticTask>,
}

const TOPICS: [(&str, [&str; 6]); 16] = [
    ("citation", ["bibtex", "references", "styles", "bibliography", "footnotes", "sources"]),
    ("spreadsheet", ["cells", "formulas", "pivots", "columns", "rows", "totals"]),
    ("imaging", ["thumbnails", "filters", "layers", "crops", "palettes", "frames"]),
    ("deploy", ["containers", "manifests", "rollouts", "secrets", "probes", "replicas"]),
    ("audio", ["waveforms", "samples", "mixes", "tracks", "codecs", "loudness"]),
    ("network", ["routes", "packets", "gateways", "subnets", "firewalls", "latency"]),
    ("archive", ["bundles", "snapshots", "checksums", "versions", "mirrors", "retention"]),
    ("billing", ["invoices", "ledgers", "rates", "refunds", "statements", "balances"]),
    ("survey", ["responses", "quotas", "panels", "weights", "questions", "segments"]),
    ("geodata", ["polygons", "tiles", "projections", "layers2", "coordinates", "basemaps"]),
    ("calendar", ["events", "reminders", "agendas", "invites", "timezones", "recurrences"]),
    ("inventory", ["stocks", "barcodes", "warehouses", "pallets", "reorders", "audits"]),
    ("transcript", ["captions", "speakers", "timestamps", "turns", "segments2", "diarization"]),
    ("contract", ["clauses", "parties", "annexes", "signatures", "renewals", "terms"]),
    ("genomics", ["reads", "variants", "alignments", "panels2", "assays", "coverage"]),
    ("telemetry", ["metrics", "traces", "spans", "gauges", "alerts", "dashboards"]),
];

const VERBS: [&str; 8] = ["convert", "merge", "extract", "validate", "generate", "export", "clean", "index"];
const EXTS: [&str; 5] = ["csv", "json", "pdf", "txt", "xlsx"];

/// Deterministic noun/verb substitutions used to paraphrase task text away
/// from the exact subunit wording.
const SYNONYMS: [(&str, &str); 12] = [
    ("convert", "transform"),
    ("merge", "combine"),
    ("extract", "pull"),
    ("validate", "verify"),
    ("generate", "produce"),
    ("export", "emit"),
    ("clean", "tidy"),
    ("index", "catalog"),
    ("the", "each"),
    ("input", "source"),
    ("before", "prior to"),
    ("records", "entries"),
];

fn topic_count(n_skills: usize) -> usize {
    ((n_skills as u64).isqrt() as usize).clamp(2, TOPICS.len())
}

/// Generate `n_skills` documents across `~sqrt(n)` topics. Same-topic
/// skills share two constraint lines (so some subunits have degree > 1)
/// while keeping per-skill file names and steps unique.
pub fn generate_corpus(n_skills: usize, seed: u64) -> Vec<SkillDocument> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let topics = topic_count(n_skills);
    (0..n_skills)
        .map(|i| {
            let (topic, nouns) = TOPICS[i % topics];
            let noun = nouns[rng.random_range(0..nouns.len())];
            let other = nouns[rng.random_range(0..nouns.len())];
            let verb = VERBS[rng.random_range(0..VERBS.len())];
            let verb2 = VERBS[rng.random_range(0..VERBS.len())];
            let ext = EXTS[rng.random_range(0..EXTS.len())];
            let skill_id = format!("{topic}-{noun}-{i:02}");
            let file = format!("{topic}-{noun}-{i:02}.{ext}");
            let mut body = vec![
                format!("1. {verb} the {topic} {noun} input records", verb = capitalize(verb)),
                format!("2. {verb2} the {other} entries into {file}", verb2 = capitalize(verb2)),
                format!("Run `{topic}-cli --strict {file}`"),
                format!("Always validate the {topic} ledger before export"),
                format!("Do not overwrite the {topic} archive"),
            ];
            if i % 3 == 0 {
                body.push(format!("- Export the {topic} {noun} summary table"));
            }
            SkillDocument {
                skill_id: skill_id.clone(),
                name: skill_id,
                description: format!(
                    "Manage {topic} {noun} workflows and prepare {other} outputs for {topic} jobs."
                ),
                body,
                resources: vec![],
            }
        })
        .collect()
}

fn capitalize(word: &str) -> String {
    let mut chars = word.chars();
    match chars.next() {
        Some(c) => c.to_uppercase().collect::<String>() + chars.as_str(),
        None => String::new(),
    }
}

fn paraphrase(text: &str, rng: &mut ChaCha8Rng) -> String {
    text.split_whitespace()
        .map(|w| {
            if rng.random::<f64>() < 0.25 {
                for (from, to) in SYNONYMS {
                    if w.eq_ignore_ascii_case(from) {
                        return to.to_string();
                    }
                }
            }
            w.to_string()
        })
        .collect::<Vec<_>>()
        .join(" ")
}

/// Generate tasks against a built graph: each task samples 2-3 subunits
/// of one gold skill, paraphrases them, and plants an output-contract
/// sentence naming one of the gold skill's files.
pub fn generate_tasks(prepared: &PreparedGraph, n_tasks: usize, seed: u64) -> Vec<SyntheticTask> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(0x5EED));
    let skills = &prepared.graph.skills;
    (0..n_tasks)
        .map(|i| {
            let gold = &skills[rng.random_range(0..skills.len())];
            let subunit_ids = prepared.subunits_of(&gold.skill_id);
            let mut chosen: Vec<String> = Vec::new();
            let want = 2 + (i % 2);
            let mut guard = 0;
            while chosen.len() < want.min(subunit_ids.len()) && guard < 50 {
                let pick = subunit_ids[rng.random_range(0..subunit_ids.len())].clone();
                if !chosen.contains(&pick) {
                    chosen.push(pick);
                }
                guard += 1;
            }
            let fragments: Vec<String> = chosen
                .iter()
                .map(|id| {
                    let text = prepared.subunit(id).map(|u| u.text.clone()).unwrap_or_default();
                    paraphrase(&text, &mut rng)
                })
                .collect();

            // Plant a contract sentence with one of the gold skill's files
            // when it has one.
            let file = prepared
                .subunits_of(&gold.skill_id)
                .iter()
                .filter_map(|id| prepared.subunit(id))
                .flat_map(|u| u.text.split_whitespace())
                .find(|w| crate::subunits::is_file_name_token(w))
                .map(|w| crate::subunits::clean_word(w).to_string());
            let (contract_sentence, expected_files, expected_formats) = match file {
                Some(f) => {
                    let fmt = f.rsplit_once('.').map(|(_, e)| e.to_lowercase()).unwrap_or_default();
                    let formats = if EXTS.contains(&fmt.as_str()) { vec![fmt] } else { vec![] };
                    (format!(" Produce {f} as the final output."), vec![f], formats)
                }
                None => (String::new(), vec![], vec![]),
            };

            SyntheticTask {
                task_id: format!("task-{i:03}"),
                text: format!("Task {i}: {}.{contract_sentence}", fragments.join("; ")),
                gold_skill_ids: vec![gold.skill_id.clone()],
                gold_subunit_ids: chosen,
                expected_files,
                expected_formats,
            }
        })
        .collect()
}

/// Write the corpus as a skill repository tree: `<dir>/<skill_id>/SKILL.md`.
pub fn write_corpus(docs: &[SkillDocument], dir: &Path) -> Result<()> {
    for doc in docs {
        let skill_dir = dir.join(&doc.skill_id);
        std::fs::create_dir_all(&skill_dir)?;
        let mut text = format!("---\nname: {}\ndescription: {}\n---\n", doc.name, doc.description);
        for line in &doc.body {
            text.push_str(line);
            text.push('\n');
        }
        std::fs::write(skill_dir.join(crate::corpus::SKILL_FILE_NAME), text)?;
    }
    Ok(())
}

pub fn write_taskset(tasks: &[SyntheticTask], path: &Path) -> Result<()> {
    let set = TaskSet {
        tasks: tasks.to_vec(),
    };
    let mut json = serde_json::to_string_pretty(&set)?;
    json.push('\n');
    std::fs::write(path, json)?;
    Ok(())
}

pub fn load_taskset(path: &Path) -> Result<Vec<SyntheticTask>> {
    let text = std::fs::read_to_string(path)?;
    let set: TaskSet = serde_json::from_str(&text)?;
    Ok(set.tasks)
}
