//! skillforge: index a skill repository, query it, compile per-task
//! context packets, serve the engine over HTTP, and run the evaluation
//! harness. Machine output goes to stdout as JSON; human logs go to
//! stderr. Exit codes: 0 ok, 2 usage/input error, 3 runtime error.

mod commands;
mod serve;

use clap::{Parser, Subcommand};
use std::path::PathBuf;
use std::process::ExitCode;

use skillforge_core::config::{ProviderKind, SkillForgeConfig};
use skillforge_core::Error;

#[derive(Parser, Debug)]
#[command(name = "skillforge", version, about = "Skill graph indexing, retrieval, and context compilation")]
pub struct Cli {
    #[command(subcommand)]
    command: Command,

    /// JSON config file; flags and env override it.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Embedding provider: deterministic | remote.
    #[arg(long, global = true)]
    provider: Option<String>,

    /// Remote embedding endpoint URL (env: SKILLFORGE_EMBED_ENDPOINT).
    #[arg(long, global = true)]
    endpoint: Option<String>,

    /// Selected-skill count.
    #[arg(long, global = true)]
    top_k: Option<usize>,

    /// Context packet token budget.
    #[arg(long, global = true)]
    budget: Option<usize>,

    /// Clustering seed.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Embedding dimension (deterministic provider).
    #[arg(long, global = true)]
    dim: Option<usize>,

    /// Embedding cache directory.
    #[arg(long, global = true)]
    cache: Option<PathBuf>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Build and persist the skill graph index from a repository tree.
    Index {
        /// Repository root: one subfolder with SKILL.md per skill.
        #[arg(long)]
        root: PathBuf,
        /// Output directory for skillgraph.idx and config.resolved.json.
        #[arg(long, default_value = ".")]
        out: PathBuf,
    },
    /// Retrieve skills for a task and print the result as JSON.
    Query {
        #[arg(long)]
        index: PathBuf,
        /// Task text inline.
        #[arg(long)]
        task: Option<String>,
        /// Task file: JSON {"task_id", "text", optional "contract"}.
        #[arg(long)]
        task_file: Option<PathBuf>,
        /// Optional directory for retrieval.json and the resolved config.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Retrieve and compile a context packet; write READ_FIRST.md and
    /// COORDINATOR_PACKET.json under <out>/<task_id>/.
    Compile {
        #[arg(long)]
        index: PathBuf,
        #[arg(long)]
        task: Option<String>,
        #[arg(long)]
        task_file: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Serve retrieval and compilation over HTTP.
    Serve {
        #[arg(long)]
        index: PathBuf,
        /// Bind address, e.g. 127.0.0.1:8930 (port 0 picks a free port).
        #[arg(long, default_value = "127.0.0.1:8930")]
        bind: String,
    },
    /// Run the evaluation harness over a task set.
    Eval {
        #[arg(long)]
        index: PathBuf,
        /// Task set JSON produced by `skillforge fixture` (or compatible).
        #[arg(long)]
        taskset: PathBuf,
        /// Comma-separated: full,no_bu,no_td,no_cc,vanilla,vanilla_lite.
        #[arg(long, default_value = "full,no_bu,no_td,no_cc,vanilla,vanilla_lite")]
        variants: String,
        #[arg(long)]
        out: PathBuf,
    },
    /// Generate a seeded synthetic skill repository and task set.
    Fixture {
        #[arg(long, default_value_t = 16)]
        skills: usize,
        #[arg(long, default_value_t = 20)]
        tasks: usize,
        #[arg(long)]
        out: PathBuf,
    },
}

fn resolve_config(cli: &Cli) -> Result<SkillForgeConfig, Error> {
    let mut cfg: SkillForgeConfig = match &cli.config {
        Some(path) => {
            let text = std::fs::read_to_string(path)?;
            serde_json::from_str(&text)?
        }
        None => SkillForgeConfig::default(),
    };
    if let Ok(endpoint) = std::env::var("SKILLFORGE_EMBED_ENDPOINT") {
        if !endpoint.is_empty() {
            cfg.embedding.endpoint_url = endpoint;
        }
    }
    if let Some(provider) = &cli.provider {
        cfg.embedding.provider = match provider.as_str() {
            "deterministic" => ProviderKind::Deterministic,
            "remote" => ProviderKind::Remote,
            other => return Err(Error::Config(format!("unknown provider: {other}"))),
        };
    }
    if let Some(endpoint) = &cli.endpoint {
        cfg.embedding.endpoint_url = endpoint.clone();
    }
    if let Some(top_k) = cli.top_k {
        if top_k == 0 {
            return Err(Error::Config("--top-k must be >= 1".to_string()));
        }
        cfg.retrieval.top_k = top_k;
    }
    if let Some(budget) = cli.budget {
        cfg.compile.budget_tokens = budget;
    }
    if let Some(seed) = cli.seed {
        cfg.graph.kmeans.seed = seed;
    }
    if let Some(dim) = cli.dim {
        cfg.embedding.dim = dim;
    }
    if let Some(cache) = &cli.cache {
        cfg.embedding.cache_path = Some(cache.clone());
    }
    Ok(cfg)
}

fn exit_code_for(err: &Error) -> u8 {
    match err {
        Error::RootMissing(_)
        | Error::DuplicateSkill(_)
        | Error::InvalidSkillId(_)
        | Error::EmptyRepository
        | Error::EmptyTask
        | Error::UnknownVariant(_)
        | Error::Config(_) => 2,
        Error::Io(e) if e.kind() == std::io::ErrorKind::NotFound => 2,
        Error::Json(_) => 2,
        _ => 3,
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // Help and version print to stdout with exit 0; real usage
            // errors exit 2.
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };

    let cfg = match resolve_config(&cli) {
        Ok(cfg) => cfg,
        Err(e) => {
            eprintln!("{}", serde_json::json!({ "error": e.to_string() }));
            return ExitCode::from(exit_code_for(&e));
        }
    };

    let result = match &cli.command {
        Command::Index { root, out } => commands::cmd_index(root, out, &cfg),
        Command::Query {
            index,
            task,
            task_file,
            out,
        } => commands::cmd_query(index, task.as_deref(), task_file.as_deref(), out.as_deref(), &cfg),
        Command::Compile {
            index,
            task,
            task_file,
            out,
        } => commands::cmd_compile(index, task.as_deref(), task_file.as_deref(), out, &cfg),
        Command::Serve { index, bind } => serve::cmd_serve(index, bind, &cfg),
        Command::Eval {
            index,
            taskset,
            variants,
            out,
        } => commands::cmd_eval(index, taskset, variants, out, &cfg),
        Command::Fixture { skills, tasks, out } => commands::cmd_fixture(*skills, *tasks, out, &cfg),
    };

    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{}", serde_json::json!({ "error": e.to_string() }));
            ExitCode::from(exit_code_for(&e))
        }
    }
}
