use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use forklab_bench::load;
use forklab_core::corpus;
use forklab_core::loopopts::{peel, unroll, Phase};
use forklab_core::session::{self, RunConfig};
use forklab_core::LoopId;

fn parsing(c: &mut Criterion) {
    let src = corpus::program("matmul").unwrap().source;
    c.bench_function("parse/matmul", |b| b.iter(|| forklab_core::parse(black_box(src)).unwrap()));
}

fn interpreting(c: &mut Criterion) {
    let mut g = c.benchmark_group("interpret");
    for name in ["fib", "sieve", "matmul"] {
        let (program, driver) = load(name);
        let cfg = RunConfig { invocations: 20, ..RunConfig::default() };
        g.bench_with_input(BenchmarkId::from_parameter(name), &cfg, |b, cfg| {
            b.iter(|| session::interpret_run(&program, &driver, cfg).unwrap())
        });
    }
    g.finish();
}

fn transforms(c: &mut Criterion) {
    let (program, driver) = load("stencil");
    let f = program.function(&driver.entry).unwrap();
    c.bench_function("peel/stencil", |b| b.iter(|| peel(black_box(f), LoopId(0)).unwrap()));
    let mut g = c.benchmark_group("unroll/stencil");
    for factor in [2, 8, 32] {
        g.bench_with_input(BenchmarkId::from_parameter(factor), &factor, |b, &k| {
            b.iter(|| unroll(black_box(f), LoopId(0), k).unwrap())
        });
    }
    g.finish();
}

fn forking(c: &mut Criterion) {
    let mut g = c.benchmark_group("forkgen");
    g.sample_size(10);
    for phase in [Phase::Peel, Phase::Unroll] {
        let (program, driver) = load("loops");
        let cfg = RunConfig { invocations: 200, phase, ..RunConfig::default() };
        g.bench_with_input(BenchmarkId::from_parameter(phase), &cfg, |b, cfg| {
            b.iter(|| session::forkgen("loops", &program, &driver, cfg).unwrap())
        });
    }
    g.finish();
}

criterion_group!(benches, parsing, interpreting, transforms, forking);
criterion_main!(benches);
