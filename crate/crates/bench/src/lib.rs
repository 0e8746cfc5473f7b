//! Shared fixtures for the criterion benchmarks.

use skillforge_core::config::SkillForgeConfig;
use skillforge_core::corpus::SkillDocument;
use skillforge_core::embedding::DeterministicEmbedder;
use skillforge_core::eval::generate_corpus;
use skillforge_core::graph::{build_graph, PreparedGraph};

pub const BENCH_DIM: usize = 64;

pub fn bench_config() -> SkillForgeConfig {
    let mut cfg = SkillForgeConfig::default();
    cfg.embedding.dim = BENCH_DIM;
    cfg
}

pub fn bench_embedder() -> DeterministicEmbedder {
    DeterministicEmbedder::new(BENCH_DIM).expect("bench dim is valid")
}

pub fn bench_corpus(n: usize) -> Vec<SkillDocument> {
    generate_corpus(n, 1234)
}

pub fn bench_graph(n: usize) -> PreparedGraph {
    let cfg = bench_config();
    let docs = bench_corpus(n);
    PreparedGraph::new(build_graph(&docs, &cfg, &bench_embedder(), None).expect("bench corpus builds"))
}
