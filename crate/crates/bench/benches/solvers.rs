use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use flocking_bench::{agents, grid_state, particle_state};
use flocking_core::Model;
use std::hint::black_box;

fn convolution(c: &mut Criterion) {
    let mut g = c.benchmark_group("convolution");
    for n in [64, 128, 256] {
        let s = grid_state(Model::Cs, n);
        g.bench_with_input(BenchmarkId::from_parameter(n), &s, |b, s| b.iter(|| black_box(s.conv_density())));
    }
    g.finish();
}

fn grid_step(c: &mut Criterion) {
    let mut g = c.benchmark_group("grid_step");
    g.sample_size(20);
    for model in [Model::Cs, Model::Mt] {
        let s = grid_state(model, 128);
        let dt = 0.5 * s.cfl_limit().min(s.params.dt_max);
        g.bench_function(BenchmarkId::new(model.name(), 128), |b| {
            b.iter_batched_ref(|| s.clone(), |s| s.step(dt).expect("step"), criterion::BatchSize::LargeInput)
        });
    }
    g.finish();
}

fn particle_rhs(c: &mut Criterion) {
    let mut g = c.benchmark_group("particle_rhs");
    for n in [200, 800, 3200] {
        let s = particle_state(Model::Cs, n);
        g.bench_with_input(BenchmarkId::from_parameter(n), &s, |b, s| b.iter(|| black_box(s.rhs().expect("rhs"))));
    }
    g.finish();
}

fn agent_step(c: &mut Criterion) {
    let mut g = c.benchmark_group("agent_step");
    for (dim, n) in [(1, 500), (2, 500), (1, 2000)] {
        let e = agents(dim, n);
        g.bench_function(BenchmarkId::new(format!("{dim}d"), n), |b| {
            b.iter_batched_ref(|| e.clone(), |e| e.step(1e-2).expect("step"), criterion::BatchSize::SmallInput)
        });
    }
    g.finish();
}

criterion_group!(benches, convolution, grid_step, particle_rhs, agent_step);
criterion_main!(benches);
