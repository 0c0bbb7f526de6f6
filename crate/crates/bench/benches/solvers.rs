use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use cvarlab_bench::{grid, gridworld, solver_config};
use cvarlab_core::{
    run_vili, run_viq, AugmentedPolicy, Evaluator, ForpecvarConfig, GridworldSpec, Heuristic,
    PolicySpec,
};

fn solvers(c: &mut Criterion) {
    let mut group = c.benchmark_group("solve_gridworld");
    group.sample_size(10);
    let cfg = solver_config();
    for (rows, cols) in [(5, 5), (8, 9)] {
        let model = gridworld(rows, cols);
        for atoms in [7, 13] {
            let g = grid(0.01, atoms);
            let label = format!("{rows}x{cols}/N={atoms}");
            group.bench_with_input(BenchmarkId::new("vili", &label), &g, |b, g| {
                b.iter(|| run_vili(&model, g, &cfg).unwrap())
            });
            group.bench_with_input(BenchmarkId::new("viq", &label), &g, |b, g| {
                b.iter(|| run_viq(&model, g, &cfg).unwrap())
            });
        }
    }
    group.finish();
}

fn forpecvar(c: &mut Criterion) {
    let mut group = c.benchmark_group("forpecvar_gridworld");
    let cfg = solver_config();
    let model = gridworld(8, 9);
    let start = GridworldSpec::new(8, 9).start_state();
    let sol = run_viq(&model, &grid(0.01, 13), &cfg).unwrap();
    let policy = AugmentedPolicy::from_quantile(&model, &sol, cfg.lower_tail);
    let eval = Evaluator::new(
        &model,
        PolicySpec::Augmented(&policy),
        ForpecvarConfig::default(),
    )
    .unwrap();
    for alpha in [1.0, 0.1, 0.01] {
        for (name, h) in [("min_cost", Heuristic::MinCost), ("zero", Heuristic::Zero)] {
            group.bench_with_input(BenchmarkId::new(name, alpha), &alpha, |b, &alpha| {
                b.iter(|| eval.evaluate(start, alpha, h).unwrap())
            });
        }
    }
    group.finish();
}

criterion_group!(benches, solvers, forpecvar);
criterion_main!(benches);
