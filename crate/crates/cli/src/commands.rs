//! Subcommand implementations shared by the binary and its tests.

use serde::Deserialize;
use std::fs;
use std::path::Path;

use skillforge_core::compilation::{compile, render_packet_json, render_read_first, OutputContract};
use skillforge_core::config::SkillForgeConfig;
use skillforge_core::corpus::load_repository;
use skillforge_core::embedding::{build_embedder, embedder_from_fingerprint, Embedder, EmbeddingCache};
use skillforge_core::error::{Error, Result};
use skillforge_core::eval::{self, parse_variants};
use skillforge_core::graph::{build_graph, load_graph, persist_graph, PreparedGraph};
use skillforge_core::retrieval::{prepare_task, retrieve, TaskRequest};

pub const INDEX_FILE_NAME: &str = "skillgraph.idx";

/// Read a request body into `out`, capped at 1 MiB.
pub fn open_json_body_limit(request: &mut tiny_http::Request, out: &mut String) -> bool {
    use std::io::Read;
    request.as_reader().take(1 << 20).read_to_string(out).is_ok()
}

fn write_resolved_config(out: &Path, cfg: &SkillForgeConfig) -> Result<()> {
    fs::create_dir_all(out)?;
    let mut json = serde_json::to_string_pretty(cfg)?;
    json.push('\n');
    fs::write(out.join("config.resolved.json"), json)?;
    Ok(())
}

fn open_cache(cfg: &SkillForgeConfig) -> Result<Option<EmbeddingCache>> {
    match &cfg.embedding.cache_path {
        Some(path) => Ok(Some(EmbeddingCache::open(path)?)),
        None => Ok(None),
    }
}

pub fn cmd_index(root: &Path, out: &Path, cfg: &SkillForgeConfig) -> Result<()> {
    let (manifest, docs) = load_repository(root)?;
    for w in &manifest.load_warnings {
        eprintln!("{}", serde_json::to_string(w)?);
    }
    let embedder = build_embedder(&cfg.embedding)?;
    let cache = open_cache(cfg)?;
    let graph = build_graph(&docs, cfg, embedder.as_ref(), cache.as_ref())?;
    let index_path = out.join(INDEX_FILE_NAME);
    write_resolved_config(out, cfg)?;
    let fingerprint = persist_graph(&graph, &index_path)?;
    println!(
        "{}",
        serde_json::json!({
            "skills": graph.skills.len(),
            "communities": graph.communities.len(),
            "subunits": graph.subunits.len(),
            "edges": graph.edges.len(),
            "fingerprint": fingerprint,
            "index": index_path.to_string_lossy(),
        })
    );
    Ok(())
}

pub struct LoadedIndex {
    pub prepared: PreparedGraph,
    pub fingerprint: String,
    pub embedder: Box<dyn Embedder>,
}

pub fn load_index(index_path: &Path, cfg: &SkillForgeConfig) -> Result<LoadedIndex> {
    let (graph, fingerprint) = load_graph(index_path)?;
    let embedder = embedder_from_fingerprint(&graph.build_meta.embedder_fingerprint, &cfg.embedding)?;
    Ok(LoadedIndex {
        prepared: PreparedGraph::new(graph),
        fingerprint,
        embedder,
    })
}

#[derive(Debug, Deserialize)]
struct TaskFile {
    #[serde(default)]
    task_id: Option<String>,
    text: String,
    #[serde(default)]
    contract: Option<OutputContract>,
}

pub struct TaskInput {
    pub request: TaskRequest,
    pub contract: Option<OutputContract>,
}

fn derived_task_id(text: &str) -> String {
    format!("task-{:012x}", skillforge_core::text::fnv1a64(text.as_bytes()) >> 16)
}

pub fn resolve_task(task: Option<&str>, task_file: Option<&Path>) -> Result<TaskInput> {
    match (task, task_file) {
        (Some(text), None) => Ok(TaskInput {
            request: TaskRequest::new(derived_task_id(text), text)?,
            contract: None,
        }),
        (None, Some(path)) => {
            let parsed: TaskFile = serde_json::from_str(&fs::read_to_string(path)?)?;
            let task_id = parsed.task_id.unwrap_or_else(|| derived_task_id(&parsed.text));
            Ok(TaskInput {
                request: TaskRequest::new(task_id, parsed.text)?,
                contract: parsed.contract,
            })
        }
        _ => Err(Error::Config("provide exactly one of --task or --task-file".to_string())),
    }
}

pub fn cmd_query(
    index: &Path,
    task: Option<&str>,
    task_file: Option<&Path>,
    out: Option<&Path>,
    cfg: &SkillForgeConfig,
) -> Result<()> {
    let input = resolve_task(task, task_file)?;
    let loaded = load_index(index, cfg)?;
    let cache = open_cache(cfg)?;
    let prepared_task = prepare_task(input.request, loaded.embedder.as_ref(), cache.as_ref(), cfg)?;
    let result = retrieve(&prepared_task, &loaded.prepared, cfg)?;
    let mut json = serde_json::to_string_pretty(&result)?;
    json.push('\n');
    if let Some(out) = out {
        write_resolved_config(out, cfg)?;
        fs::write(out.join("retrieval.json"), &json)?;
    }
    print!("{json}");
    Ok(())
}

pub fn cmd_compile(
    index: &Path,
    task: Option<&str>,
    task_file: Option<&Path>,
    out: &Path,
    cfg: &SkillForgeConfig,
) -> Result<()> {
    let input = resolve_task(task, task_file)?;
    let loaded = load_index(index, cfg)?;
    let cache = open_cache(cfg)?;
    let prepared_task = prepare_task(input.request, loaded.embedder.as_ref(), cache.as_ref(), cfg)?;
    let result = retrieve(&prepared_task, &loaded.prepared, cfg)?;
    let ctx = compile(&prepared_task, &result, &loaded.prepared, cfg, input.contract)?;

    let task_dir = out.join(&ctx.task_id);
    fs::create_dir_all(&task_dir)?;
    write_resolved_config(out, cfg)?;
    fs::write(task_dir.join("READ_FIRST.md"), render_read_first(&ctx))?;
    fs::write(task_dir.join("COORDINATOR_PACKET.json"), render_packet_json(&ctx)?)?;

    println!(
        "{}",
        serde_json::json!({
            "task_id": ctx.task_id,
            "total_tokens": ctx.total_tokens,
            "budget": ctx.budget,
            "sections": ctx.sections.len(),
            "dropped": ctx.dropped.len(),
            "out": task_dir.to_string_lossy(),
        })
    );
    Ok(())
}

pub fn cmd_eval(index: &Path, taskset: &Path, variants: &str, out: &Path, cfg: &SkillForgeConfig) -> Result<()> {
    let variants = parse_variants(variants)?;
    let tasks = eval::load_taskset(taskset)?;
    let loaded = load_index(index, cfg)?;
    let cache = open_cache(cfg)?;
    let report = eval::run_eval(&tasks, &variants, &loaded.prepared, loaded.embedder.as_ref(), cache.as_ref(), cfg)?;
    write_resolved_config(out, cfg)?;
    eval::write_report(&report, out)?;
    let mut json = serde_json::to_string_pretty(&report)?;
    json.push('\n');
    print!("{json}");
    Ok(())
}

pub fn cmd_fixture(skills: usize, tasks: usize, out: &Path, cfg: &SkillForgeConfig) -> Result<()> {
    if skills == 0 {
        return Err(Error::Config("--skills must be >= 1".to_string()));
    }
    let seed = cfg.graph.kmeans.seed;
    let docs = eval::generate_corpus(skills, seed);
    let corpus_dir = out.join("skills");
    eval::write_corpus(&docs, &corpus_dir)?;

    // Tasks are sampled against the built graph so gold subunit ids are
    // real.
    let embedder = build_embedder(&cfg.embedding)?;
    let graph = build_graph(&docs, cfg, embedder.as_ref(), None)?;
    let prepared = PreparedGraph::new(graph);
    let task_list = eval::generate_tasks(&prepared, tasks, seed);
    let taskset_path = out.join("taskset.json");
    eval::write_taskset(&task_list, &taskset_path)?;

    println!(
        "{}",
        serde_json::json!({
            "skills": skills,
            "tasks": task_list.len(),
            "seed": seed,
            "corpus": corpus_dir.to_string_lossy(),
            "taskset": taskset_path.to_string_lossy(),
        })
    );
    Ok(())
}
