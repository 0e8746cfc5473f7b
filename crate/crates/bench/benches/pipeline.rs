use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use std::hint::black_box;

use skillforge_bench::{bench_config, bench_corpus, bench_embedder, bench_graph};
use skillforge_core::compilation::compile;
use skillforge_core::graph::build_graph;
use skillforge_core::retrieval::{prepare_task, retrieve, TaskRequest};

fn bench_index(c: &mut Criterion) {
    let cfg = bench_config();
    let embedder = bench_embedder();
    let mut group = c.benchmark_group("index");
    for n in [16usize, 64, 128] {
        let docs = bench_corpus(n);
        group.bench_with_input(BenchmarkId::from_parameter(n), &docs, |b, docs| {
            b.iter(|| build_graph(black_box(docs), &cfg, &embedder, None).unwrap());
        });
    }
    group.finish();
}

fn bench_retrieve(c: &mut Criterion) {
    let cfg = bench_config();
    let embedder = bench_embedder();
    let mut group = c.benchmark_group("retrieve");
    for n in [64usize, 256] {
        let prepared = bench_graph(n);
        let task = prepare_task(
            TaskRequest::new("bench", "validate the citation ledger and produce summary.csv").unwrap(),
            &embedder,
            None,
            &cfg,
        )
        .unwrap();
        group.bench_with_input(BenchmarkId::from_parameter(n), &prepared, |b, prepared| {
            b.iter(|| retrieve(black_box(&task), prepared, &cfg).unwrap());
        });
    }
    group.finish();
}

fn bench_compile(c: &mut Criterion) {
    let cfg = bench_config();
    let embedder = bench_embedder();
    let prepared = bench_graph(64);
    let task = prepare_task(
        TaskRequest::new("bench", "merge the imaging thumbnails and export report.pdf").unwrap(),
        &embedder,
        None,
        &cfg,
    )
    .unwrap();
    let retrieval = retrieve(&task, &prepared, &cfg).unwrap();
    c.bench_function("compile/64", |b| {
        b.iter(|| compile(black_box(&task), &retrieval, &prepared, &cfg, None).unwrap());
    });
}

criterion_group!(benches, bench_index, bench_retrieve, bench_compile);
criterion_main!(benches);
