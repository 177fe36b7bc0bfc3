use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use jumphist_core::hilbert::expm;
use jumphist_core::histories::{full_decoherence_matrix, Convention, HistoryEngine, History};
use jumphist_core::liouville::build_propagator;
use jumphist_core::model::build_total_model;
use jumphist_core::trajectories::Unraveling;
use jumphist_core::{ModelParams, Superoperator};

fn regime(n_steps: usize) -> ModelParams {
    ModelParams::qubit(0.05, 1.0, 500.0, 0.05, n_steps)
}

fn bench_propagator(c: &mut Criterion) {
    let p = regime(4);
    let model = build_total_model(&p).unwrap();
    let generator = Superoperator::generator(&model);
    let scaled = generator.matrix() * jumphist_core::C64::new(p.dt, 0.0);
    c.bench_function("expm 16x16 generator", |b| b.iter(|| expm(black_box(&scaled)).unwrap()));
    c.bench_function("build_propagator", |b| b.iter(|| build_propagator(black_box(&model), p.dt).unwrap()));
}

fn bench_histories(c: &mut Criterion) {
    let mut g = c.benchmark_group("full_decoherence_matrix");
    g.sample_size(10);
    for n in [6, 7, 8] {
        let p = regime(n);
        g.bench_with_input(BenchmarkId::from_parameter(n), &p, |b, p| {
            b.iter(|| full_decoherence_matrix(p, Convention::Literal, 10).unwrap())
        });
    }
    g.finish();

    let p = regime(2000);
    let engine = HistoryEngine::new(&p, Convention::Literal).unwrap();
    let h = History::onset(2000, 1002);
    let h2 = History::onset(2000, 1001);
    c.bench_function("functional N=2000", |b| b.iter(|| engine.functional(black_box(&h), black_box(&h2)).unwrap()));
}

fn bench_trajectories(c: &mut Criterion) {
    let p = ModelParams::qubit(0.5, 1.0, 50.0, 0.05, 2000);
    let u = Unraveling::new(&p).unwrap();
    let mut g = c.benchmark_group("trajectories");
    g.sample_size(20);
    g.bench_function("single N=2000", |b| b.iter(|| u.sample(black_box(7)).unwrap()));
    g.bench_function("1000 x N=2000", |b| b.iter(|| u.sample_many(black_box(7), 1000).unwrap()));
    g.finish();
}

criterion_group!(benches, bench_propagator, bench_histories, bench_trajectories);
criterion_main!(benches);
