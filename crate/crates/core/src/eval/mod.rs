//! Evaluation harness: runs the full method and its ablations (plus flat
//! baselines with and without the lite compilation protocol) over a
//! synthetic task set with planted relevance, and reports ranking,
//! evidence, and budget metrics as JSON and a markdown table.

mod baselines;
mod oracle;
pub mod synthetic;

pub use baselines::{
    baseline_llm_pool, baseline_vanilla, baseline_vanilla_rank, select_from_pool, SkillSelector, LLM_POOL_SIZE,
};
pub use oracle::brute_force_rank;
pub use synthetic::{generate_corpus, generate_tasks, load_taskset, write_corpus, write_taskset, SyntheticTask};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use crate::compilation::{compile, lite_compile, render_packet_json, render_read_first, CompiledContext};
use crate::config::{hex, SkillForgeConfig};
use crate::embedding::{Embedder, EmbeddingCache};
use crate::error::{Error, Result};
use crate::graph::PreparedGraph;
use crate::retrieval::{
    export_highlights, export_rescue_candidates, match_communities, match_subunits, prepare_task, project_l0,
    rank_all, skill_level_scores, PreparedTask, RetrievalResult, ScoredSkill, TaskRequest,
};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct AblationSpec {
    /// beta <- 0.
    pub disable_bottom_up: bool,
    /// lambda <- 0 and an empty boosted set.
    pub disable_top_down: bool,
    /// Selected skills only; no packet.
    pub disable_compilation: bool,
    /// Same budget machinery with no highlights and no cues.
    pub lite_compilation: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EvalVariant {
    Full,
    NoBu,
    NoTd,
    NoCc,
    Vanilla,
    VanillaLite,
}

impl EvalVariant {
    pub fn parse(name: &str) -> Result<Self> {
        match name.trim() {
            "full" => Ok(Self::Full),
            "no_bu" => Ok(Self::NoBu),
            "no_td" => Ok(Self::NoTd),
            "no_cc" => Ok(Self::NoCc),
            "vanilla" => Ok(Self::Vanilla),
            "vanilla_lite" => Ok(Self::VanillaLite),
            other => Err(Error::UnknownVariant(other.to_string())),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Self::Full => "full",
            Self::NoBu => "no_bu",
            Self::NoTd => "no_td",
            Self::NoCc => "no_cc",
            Self::Vanilla => "vanilla",
            Self::VanillaLite => "vanilla_lite",
        }
    }

    pub fn all() -> [Self; 6] {
        [Self::Full, Self::NoBu, Self::NoTd, Self::NoCc, Self::Vanilla, Self::VanillaLite]
    }

    fn ablation(&self) -> AblationSpec {
        match self {
            Self::Full => AblationSpec::default(),
            Self::NoBu => AblationSpec {
                disable_bottom_up: true,
                ..Default::default()
            },
            Self::NoTd => AblationSpec {
                disable_top_down: true,
                ..Default::default()
            },
            Self::NoCc => AblationSpec {
                disable_compilation: true,
                ..Default::default()
            },
            Self::Vanilla => AblationSpec {
                disable_compilation: true,
                ..Default::default()
            },
            Self::VanillaLite => AblationSpec {
                lite_compilation: true,
                ..Default::default()
            },
        }
    }
}

pub fn parse_variants(spec: &str) -> Result<Vec<EvalVariant>> {
    spec.split(',')
        .filter(|s| !s.trim().is_empty())
        .map(EvalVariant::parse)
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VariantReport {
    pub recall_at_k: f64,
    pub mrr: f64,
    pub highlight_hit_rate: f64,
    pub rescue_precision: f64,
    pub rescued_total: usize,
    pub budget_compliance: f64,
    pub packets: usize,
    pub packet_determinism_hash: String,
    pub tasks: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub top_k: usize,
    pub variants: BTreeMap<String, VariantReport>,
}

/// Graph-native retrieval with ablation switches applied.
pub fn retrieve_with_ablation(
    task: &PreparedTask,
    prepared: &PreparedGraph,
    cfg: &SkillForgeConfig,
    spec: &AblationSpec,
) -> Result<RetrievalResult> {
    let mut cfg = cfg.clone();
    if spec.disable_bottom_up {
        cfg.retrieval.beta = 0.0;
    }
    let (matched_communities, boosted) = if spec.disable_top_down {
        cfg.retrieval.lambda = 0.0;
        (Vec::new(), BTreeSet::new())
    } else {
        match_communities(&task.embedding, prepared, &cfg)?
    };
    let retained = match_subunits(&task.embedding, prepared, &cfg)?;
    let l0 = project_l0(&retained, prepared);
    let (l1, name_score) = skill_level_scores(&task.embedding, &task.tokens, prepared)?;
    let ranking = rank_all(&l1, &l0, &name_score, &boosted, prepared, &cfg);
    let selected: Vec<ScoredSkill> = ranking.iter().take(cfg.retrieval.top_k).cloned().collect();
    let highlights = export_highlights(&selected, &retained, prepared, &cfg);
    let rescue = export_rescue_candidates(&ranking, &selected, &retained, prepared, &cfg);
    Ok(RetrievalResult {
        task_id: task.request.task_id.clone(),
        selected,
        highlights,
        rescue,
        matched_communities,
        retained_subunits: retained,
    })
}

fn vanilla_as_retrieval(
    task: &PreparedTask,
    prepared: &PreparedGraph,
    embedder: &dyn Embedder,
    cache: Option<&EmbeddingCache>,
    cfg: &SkillForgeConfig,
) -> Result<(RetrievalResult, Vec<ScoredSkill>)> {
    let ranking_scores = baseline_vanilla_rank(task, prepared, embedder, cache)?;
    let ranking: Vec<ScoredSkill> = ranking_scores
        .iter()
        .enumerate()
        .map(|(i, (id, score))| ScoredSkill {
            skill_id: id.clone(),
            l1: 0.0,
            l0: 0.0,
            name_score: 0.0,
            community_boosted: false,
            final_score: *score,
            rank: i + 1,
        })
        .collect();
    let selected: Vec<ScoredSkill> = ranking.iter().take(cfg.retrieval.top_k).cloned().collect();
    let result = RetrievalResult {
        task_id: task.request.task_id.clone(),
        selected,
        highlights: BTreeMap::new(),
        rescue: Vec::new(),
        matched_communities: Vec::new(),
        retained_subunits: Vec::new(),
    };
    Ok((result, ranking))
}

struct Tally {
    recall_sum: f64,
    mrr_sum: f64,
    highlight_sum: f64,
    highlight_tasks: usize,
    rescue_hits: usize,
    rescue_total: usize,
    packets_ok: usize,
    packets: usize,
    hasher: Sha256,
    tasks: usize,
}

impl Tally {
    fn new() -> Self {
        Self {
            recall_sum: 0.0,
            mrr_sum: 0.0,
            highlight_sum: 0.0,
            highlight_tasks: 0,
            rescue_hits: 0,
            rescue_total: 0,
            packets_ok: 0,
            packets: 0,
            hasher: Sha256::new(),
            tasks: 0,
        }
    }

    fn observe_ranking(&mut self, ranking: &[ScoredSkill], gold: &[String], k: usize) {
        self.tasks += 1;
        if gold.is_empty() {
            return;
        }
        let top: BTreeSet<&str> = ranking.iter().take(k).map(|s| s.skill_id.as_str()).collect();
        let hits = gold.iter().filter(|g| top.contains(g.as_str())).count();
        self.recall_sum += hits as f64 / gold.len() as f64;
        let first = ranking
            .iter()
            .find(|s| gold.iter().any(|g| g == &s.skill_id))
            .map(|s| s.rank);
        if let Some(rank) = first {
            self.mrr_sum += 1.0 / rank as f64;
        }
    }

    fn observe_highlights(&mut self, retrieval: &RetrievalResult, gold_subunits: &[String]) {
        if gold_subunits.is_empty() {
            return;
        }
        self.highlight_tasks += 1;
        let exported: BTreeSet<&str> = retrieval
            .highlights
            .values()
            .flatten()
            .map(|h| h.subunit_id.as_str())
            .collect();
        let hits = gold_subunits.iter().filter(|g| exported.contains(g.as_str())).count();
        self.highlight_sum += hits as f64 / gold_subunits.len() as f64;
    }

    fn observe_packet(&mut self, ctx: &CompiledContext, gold_subunits: &[String]) {
        self.packets += 1;
        if ctx.total_tokens <= ctx.budget {
            self.packets_ok += 1;
        }
        for cue in ctx.cues.iter().filter(|c| c.accepted) {
            self.rescue_total += 1;
            if gold_subunits.contains(&cue.subunit_id) {
                self.rescue_hits += 1;
            }
        }
        self.hasher.update(render_read_first(ctx).as_bytes());
        if let Ok(json) = render_packet_json(ctx) {
            self.hasher.update(json.as_bytes());
        }
    }

    fn finish(self, top_k: usize) -> VariantReport {
        let n = self.tasks.max(1) as f64;
        VariantReport {
            recall_at_k: self.recall_sum / n,
            mrr: self.mrr_sum / n,
            highlight_hit_rate: self.highlight_sum / self.highlight_tasks.max(1) as f64,
            rescue_precision: if self.rescue_total == 0 {
                1.0
            } else {
                self.rescue_hits as f64 / self.rescue_total as f64
            },
            rescued_total: self.rescue_total,
            budget_compliance: if self.packets == 0 {
                1.0
            } else {
                self.packets_ok as f64 / self.packets as f64
            },
            packets: self.packets,
            packet_determinism_hash: hex(&self.hasher.finalize()),
            tasks: self.tasks,
        }
        .round_for_report(top_k)
    }
}

impl VariantReport {
    fn round_for_report(mut self, _top_k: usize) -> Self {
        // Stable formatting for report files.
        self.recall_at_k = (self.recall_at_k * 1e6).round() / 1e6;
        self.mrr = (self.mrr * 1e6).round() / 1e6;
        self.highlight_hit_rate = (self.highlight_hit_rate * 1e6).round() / 1e6;
        self.rescue_precision = (self.rescue_precision * 1e6).round() / 1e6;
        self.budget_compliance = (self.budget_compliance * 1e6).round() / 1e6;
        self
    }
}

/// Evaluate every requested variant across the task set.
pub fn run_eval(
    tasks: &[SyntheticTask],
    variants: &[EvalVariant],
    prepared: &PreparedGraph,
    embedder: &dyn Embedder,
    cache: Option<&EmbeddingCache>,
    cfg: &SkillForgeConfig,
) -> Result<EvalReport> {
    let k = cfg.retrieval.top_k;
    let mut reports = BTreeMap::new();

    for variant in variants {
        let spec = variant.ablation();
        let mut tally = Tally::new();
        for task in tasks {
            let prepared_task = prepare_task(
                TaskRequest::new(task.task_id.clone(), task.text.clone())?,
                embedder,
                cache,
                cfg,
            )?;
            match variant {
                EvalVariant::Vanilla | EvalVariant::VanillaLite => {
                    let (retrieval, ranking) = vanilla_as_retrieval(&prepared_task, prepared, embedder, cache, cfg)?;
                    tally.observe_ranking(&ranking, &task.gold_skill_ids, k);
                    tally.observe_highlights(&retrieval, &task.gold_subunit_ids);
                    if spec.lite_compilation {
                        let ctx = lite_compile(&prepared_task, &retrieval, prepared, cfg, None)?;
                        tally.observe_packet(&ctx, &task.gold_subunit_ids);
                    }
                }
                _ => {
                    let mut cfg_variant = cfg.clone();
                    if spec.disable_bottom_up {
                        cfg_variant.retrieval.beta = 0.0;
                    }
                    if spec.disable_top_down {
                        cfg_variant.retrieval.lambda = 0.0;
                    }
                    let retrieval = retrieve_with_ablation(&prepared_task, prepared, cfg, &spec)?;
                    // Recover the full ranking for MRR.
                    let full_ranking = full_ranking_for(&prepared_task, prepared, &cfg_variant, &spec)?;
                    tally.observe_ranking(&full_ranking, &task.gold_skill_ids, k);
                    tally.observe_highlights(&retrieval, &task.gold_subunit_ids);
                    if !spec.disable_compilation {
                        let ctx = compile(&prepared_task, &retrieval, prepared, cfg, None)?;
                        tally.observe_packet(&ctx, &task.gold_subunit_ids);
                    }
                }
            }
        }
        reports.insert(variant.name().to_string(), tally.finish(k));
    }

    Ok(EvalReport {
        top_k: k,
        variants: reports,
    })
}

fn full_ranking_for(
    task: &PreparedTask,
    prepared: &PreparedGraph,
    cfg: &SkillForgeConfig,
    spec: &AblationSpec,
) -> Result<Vec<ScoredSkill>> {
    let boosted = if spec.disable_top_down {
        BTreeSet::new()
    } else {
        match_communities(&task.embedding, prepared, cfg)?.1
    };
    let retained = match_subunits(&task.embedding, prepared, cfg)?;
    let l0 = project_l0(&retained, prepared);
    let (l1, name_score) = skill_level_scores(&task.embedding, &task.tokens, prepared)?;
    Ok(rank_all(&l1, &l0, &name_score, &boosted, prepared, cfg))
}

pub fn render_report_markdown(report: &EvalReport) -> String {
    let mut out = String::new();
    out.push_str("# Evaluation report\n\n");
    out.push_str(&format!("Top-k = {}\n\n", report.top_k));
    out.push_str("| variant | recall@k | mrr | highlight hit | rescue precision | rescued | budget ok | packets | tasks |\n");
    out.push_str("|---|---|---|---|---|---|---|---|---|\n");
    for (name, v) in &report.variants {
        out.push_str(&format!(
            "| {name} | {:.4} | {:.4} | {:.4} | {:.4} | {} | {:.4} | {} | {} |\n",
            v.recall_at_k, v.mrr, v.highlight_hit_rate, v.rescue_precision, v.rescued_total, v.budget_compliance,
            v.packets, v.tasks
        ));
    }
    out
}

/// Write report.json and report.md under `dir`.
pub fn write_report(report: &EvalReport, dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    let mut json = serde_json::to_string_pretty(report)?;
    json.push('\n');
    std::fs::write(dir.join("report.json"), json)?;
    std::fs::write(dir.join("report.md"), render_report_markdown(report))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::embedding::DeterministicEmbedder;
    use crate::graph::build_graph;
    use crate::retrieval::retrieve;

    fn setup(n: usize, seed: u64) -> (PreparedGraph, SkillForgeConfig, DeterministicEmbedder) {
        let mut cfg = SkillForgeConfig::default();
        cfg.embedding.dim = 48;
        let embedder = DeterministicEmbedder::new(48).unwrap();
        let docs = generate_corpus(n, seed);
        let graph = build_graph(&docs, &cfg, &embedder, None).unwrap();
        (PreparedGraph::new(graph), cfg, embedder)
    }

    #[test]
    fn variant_parsing() {
        assert_eq!(
            parse_variants("full,no_bu,no_td,no_cc,vanilla,vanilla_lite").unwrap(),
            EvalVariant::all().to_vec()
        );
        assert!(matches!(parse_variants("bogus"), Err(Error::UnknownVariant(_))));
    }

    #[test]
    fn oracle_agrees_with_retrieval_on_fixtures() {
        for seed in 0..10u64 {
            let n = 8 + (seed as usize * 5) % 40;
            let (prepared, cfg, embedder) = setup(n, seed);
            let tasks = generate_tasks(&prepared, 4, seed);
            for t in &tasks {
                let prepared_task = prepare_task(
                    TaskRequest::new(t.task_id.clone(), t.text.clone()).unwrap(),
                    &embedder,
                    None,
                    &cfg,
                )
                .unwrap();
                let fast = retrieve(&prepared_task, &prepared, &cfg).unwrap();
                let slow = brute_force_rank(&prepared_task, &prepared, &cfg).unwrap();
                let fast_ids: Vec<&String> = fast.selected.iter().map(|s| &s.skill_id).collect();
                let slow_ids: Vec<&String> = slow.iter().take(cfg.retrieval.top_k).map(|s| &s.skill_id).collect();
                assert_eq!(fast_ids, slow_ids, "seed {seed} task {}", t.task_id);
                for (f, s) in fast.selected.iter().zip(slow.iter()) {
                    assert!((f.final_score - s.final_score).abs() < 1e-9);
                    assert_eq!(f.rank, s.rank);
                }
            }
        }
    }

    #[test]
    fn ablations_change_only_their_term() {
        let (prepared, cfg, embedder) = setup(24, 4);
        let tasks = generate_tasks(&prepared, 6, 4);
        for t in &tasks {
            let prepared_task = prepare_task(
                TaskRequest::new(t.task_id.clone(), t.text.clone()).unwrap(),
                &embedder,
                None,
                &cfg,
            )
            .unwrap();
            let full = retrieve_with_ablation(&prepared_task, &prepared, &cfg, &AblationSpec::default()).unwrap();
            let no_bu = retrieve_with_ablation(
                &prepared_task,
                &prepared,
                &cfg,
                &AblationSpec {
                    disable_bottom_up: true,
                    ..Default::default()
                },
            )
            .unwrap();
            let no_td = retrieve_with_ablation(
                &prepared_task,
                &prepared,
                &cfg,
                &AblationSpec {
                    disable_top_down: true,
                    ..Default::default()
                },
            )
            .unwrap();
            // Component scores are unchanged; only the fused term differs.
            for (a, b) in full.selected.iter().zip(no_bu.selected.iter()) {
                if a.skill_id == b.skill_id {
                    assert_eq!(a.l1, b.l1);
                    assert_eq!(a.name_score, b.name_score);
                }
            }
            assert!(no_td.matched_communities.is_empty());
            assert!(no_td.selected.iter().all(|s| !s.community_boosted));
        }
    }

    #[test]
    fn report_is_deterministic() {
        let (prepared, cfg, embedder) = setup(16, 6);
        let tasks = generate_tasks(&prepared, 8, 6);
        let variants = [EvalVariant::Full, EvalVariant::Vanilla, EvalVariant::VanillaLite];
        let a = run_eval(&tasks, &variants, &prepared, &embedder, None, &cfg).unwrap();
        let b = run_eval(&tasks, &variants, &prepared, &embedder, None, &cfg).unwrap();
        assert_eq!(a, b);
        assert_eq!(serde_json::to_vec(&a).unwrap(), serde_json::to_vec(&b).unwrap());
    }

    #[test]
    fn budget_compliance_is_total_across_variants() {
        let (prepared, cfg, embedder) = setup(20, 12);
        let tasks = generate_tasks(&prepared, 10, 12);
        let report = run_eval(&tasks, &EvalVariant::all(), &prepared, &embedder, None, &cfg).unwrap();
        for (name, v) in &report.variants {
            assert_eq!(v.budget_compliance, 1.0, "variant {name}");
        }
    }

    #[test]
    fn full_is_at_least_as_good_as_ablations_on_planted_suite() {
        let (prepared, cfg, embedder) = setup(48, 21);
        let tasks = generate_tasks(&prepared, 40, 21);
        let report = run_eval(&tasks, &EvalVariant::all(), &prepared, &embedder, None, &cfg).unwrap();
        let full = report.variants["full"].recall_at_k;
        for name in ["no_bu", "no_td", "no_cc", "vanilla"] {
            assert!(
                full >= report.variants[name].recall_at_k,
                "full {full} < {name} {}",
                report.variants[name].recall_at_k
            );
        }
    }

    #[test]
    fn report_files_are_written() {
        let (prepared, cfg, embedder) = setup(12, 2);
        let tasks = generate_tasks(&prepared, 4, 2);
        let report = run_eval(&tasks, &[EvalVariant::Full], &prepared, &embedder, None, &cfg).unwrap();
        let tmp = tempfile::tempdir().unwrap();
        write_report(&report, tmp.path()).unwrap();
        assert!(tmp.path().join("report.json").is_file());
        let md = std::fs::read_to_string(tmp.path().join("report.md")).unwrap();
        assert!(md.contains("| full |"));
    }
}
