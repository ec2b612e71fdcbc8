use criterion::{black_box, criterion_group, criterion_main, BenchmarkId, Criterion};
use dynpr::integrate::epoch_grid;
use dynpr::synth::{random_activity, random_graph};
use dynpr::{build_transition, evolve_rk, EvolutionConfig, Execution, Method, TeleportSchedule};

const MODES: [(&str, Execution); 2] = [("sequential", Execution::Sequential), ("parallel", Execution::Parallel)];

fn apply(c: &mut Criterion) {
    let mut group = c.benchmark_group("apply");
    for &(n, m) in &[(10_000, 100_000), (200_000, 2_000_000)] {
        let p = build_transition(&random_graph(n, m, 1).unwrap()).unwrap();
        let x = vec![1.0 / n as f64; n];
        let mut y = vec![0.0; n];
        for (name, exec) in MODES {
            group.bench_with_input(BenchmarkId::new(name, m), &exec, |b, &exec| {
                b.iter(|| p.apply_into(black_box(&x), &mut y, exec).unwrap())
            });
        }
    }
    group.finish();
}

fn evolve(c: &mut Criterion) {
    let mut group = c.benchmark_group("evolve_rk");
    group.sample_size(10);
    let (n, m, k) = (50_000, 500_000, 4);
    let p = build_transition(&random_graph(n, m, 2).unwrap()).unwrap();
    let act = random_activity(n, k, 2).unwrap();
    let sched = TeleportSchedule::from_activity(&act, 1.0, k as f64).unwrap();
    for (name, exec) in MODES {
        let mut cfg = EvolutionConfig::new(0.85, k as f64, Method::rk45(), epoch_grid(1.0, k));
        cfg.execution = exec;
        group.bench_function(BenchmarkId::new(name, m), |b| {
            b.iter(|| evolve_rk(&p, &sched, &cfg).unwrap())
        });
    }
    group.finish();
}

criterion_group!(benches, apply, evolve);
criterion_main!(benches);
