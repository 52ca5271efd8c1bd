use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

use auv_gnc::harness::{run_campaign, ScenarioConfig, TrajectoryKind};
use auv_gnc::par::Execution;
use auv_gnc::tune::{pso_minimize, OptBudget, Outcome, Problem, PsoParams};

fn short_base() -> ScenarioConfig {
    ScenarioConfig {
        duration_cap: Some(20.0),
        ..ScenarioConfig::default()
    }
}

fn bench_campaign(c: &mut Criterion) {
    let base = short_base();
    let mut group = c.benchmark_group("campaign_6_runs");
    group.sample_size(10);
    for exec in [Execution::Parallel, Execution::Sequential] {
        group.bench_with_input(BenchmarkId::from_parameter(format!("{exec:?}")), &exec, |b, &exec| {
            b.iter(|| run_campaign(&base, 6, 1, &TrajectoryKind::ALL, &[], exec).unwrap())
        });
    }
    group.finish();
}

/// Rosenbrock with an artificial per-evaluation cost.
struct Costly;

impl Problem for Costly {
    fn lower(&self) -> Vec<f64> {
        vec![-2.0; 4]
    }
    fn upper(&self) -> Vec<f64> {
        vec![2.0; 4]
    }
    fn evaluate(&self, x: &[f64]) -> Outcome {
        let mut acc = 0.0;
        for k in 0..20_000 {
            acc += ((k as f64) * 1e-4 + x[0]).sin() * 1e-9;
        }
        let f: f64 = x.windows(2).map(|w| 100.0 * (w[1] - w[0] * w[0]).powi(2) + (1.0 - w[0]).powi(2)).sum();
        Outcome::value(f + acc)
    }
}

fn bench_pso(c: &mut Criterion) {
    let mut group = c.benchmark_group("pso_225_evals");
    for exec in [Execution::Parallel, Execution::Sequential] {
        group.bench_with_input(BenchmarkId::from_parameter(format!("{exec:?}")), &exec, |b, &exec| {
            b.iter(|| pso_minimize(&Costly, &OptBudget::default(), &PsoParams::default(), 3, exec).unwrap())
        });
    }
    group.finish();
}

criterion_group!(benches, bench_campaign, bench_pso);
criterion_main!(benches);
