use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use nnsketch::{BuildOptions, Engine, Sketch};
use nnsketch_bench::fixture;

fn opts(engine: Engine, distances: bool) -> BuildOptions {
    BuildOptions {
        engine,
        distances,
        ..BuildOptions::default()
    }
}

fn build(c: &mut Criterion) {
    let mut g = c.benchmark_group("build");
    g.sample_size(10);
    for n in [128, 512] {
        let (points, params, _) = fixture(n, 6, 1024, 0.25, 16, 1);
        g.bench_with_input(BenchmarkId::new("exact", n), &n, |b, _| {
            b.iter(|| Sketch::build(black_box(&points), &params, &opts(Engine::Exact, false)).unwrap())
        });
        g.bench_with_input(BenchmarkId::new("exact+distances", n), &n, |b, _| {
            b.iter(|| Sketch::build(black_box(&points), &params, &opts(Engine::Exact, true)).unwrap())
        });
        g.bench_with_input(BenchmarkId::new("quadtree", n), &n, |b, _| {
            b.iter(|| Sketch::build(black_box(&points), &params, &opts(Engine::Quadtree, false)).unwrap())
        });
    }
    g.finish();
}

fn query(c: &mut Criterion) {
    let (points, params, queries) = fixture(256, 6, 1024, 0.25, 16, 2);
    let mut g = c.benchmark_group("query");
    for (name, o) in [
        ("ann/exact", opts(Engine::Exact, false)),
        ("ann/quadtree", opts(Engine::Quadtree, false)),
    ] {
        let sk = Sketch::build(&points, &params, &o).unwrap();
        g.bench_function(name, |b| {
            b.iter(|| queries.iter().map(|y| sk.query_ann(black_box(y)).unwrap()).sum::<usize>())
        });
    }
    let sk = Sketch::build(&points, &params, &opts(Engine::Exact, true)).unwrap();
    g.bench_function("all_distances", |b| {
        b.iter(|| queries.iter().map(|y| sk.query_all_distances(black_box(y)).unwrap().len()).sum::<usize>())
    });
    g.finish();
}

fn codec(c: &mut Criterion) {
    let (points, params, _) = fixture(512, 6, 1024, 0.25, 16, 3);
    let mut g = c.benchmark_group("codec");
    for (name, o) in [("exact", opts(Engine::Exact, true)), ("quadtree", opts(Engine::Quadtree, false))] {
        let sk = Sketch::build(&points, &params, &o).unwrap();
        let blob = sk.encode();
        g.bench_function(format!("encode/{name}"), |b| b.iter(|| black_box(&sk).encode()));
        g.bench_function(format!("decode/{name}"), |b| b.iter(|| Sketch::decode(black_box(&blob)).unwrap()));
    }
    g.finish();
}

criterion_group!(benches, build, query, codec);
criterion_main!(benches);
