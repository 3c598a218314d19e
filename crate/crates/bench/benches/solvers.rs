use std::collections::BTreeMap;
use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};
use dividend_core::howard::DEFAULT_MAX_ITERATIONS;
use dividend_core::oracle::{exact_optimal, OracleProblem, Terminal};
use dividend_core::{
    howard_solve, simulate_paths, solve_exp, solve_neutral, solve_power, DecisionRule, IncomeDistribution,
    ProblemConfig, Utility,
};

fn two_point() -> IncomeDistribution {
    IncomeDistribution::two_point(0.6, 1).unwrap()
}

fn exp_config() -> ProblemConfig {
    ProblemConfig::new(Utility::Exponential, 0.9, -0.5, two_point(), 45).unwrap()
}

fn exponential(c: &mut Criterion) {
    let cfg = exp_config();
    c.bench_function("solve_exp/p0.6_x45", |b| b.iter(|| solve_exp(black_box(&cfg)).unwrap()));

    let sol = solve_exp(&cfg).unwrap();
    let model = sol.model.clone();
    c.bench_function("howard/p0.6_x45", |b| {
        b.iter(|| howard_solve(&model, DecisionRule::pay_all(model.depth(), 45), DEFAULT_MAX_ITERATIONS).unwrap())
    });
}

fn power(c: &mut Criterion) {
    let cfg = ProblemConfig::new(Utility::Power, 0.5, 0.5, two_point(), 8)
        .unwrap()
        .with_tail_eps(0.1)
        .with_grid_points(256);
    let mut g = c.benchmark_group("solve_power");
    g.sample_size(10);
    g.bench_function("p0.6_x8", |b| b.iter(|| solve_power(black_box(&cfg)).unwrap()));
    g.finish();
}

fn neutral(c: &mut Criterion) {
    let cfg = ProblemConfig::new(Utility::RiskNeutral, 0.9, 0.0, two_point(), 60).unwrap();
    c.bench_function("solve_neutral/p0.6_x60", |b| b.iter(|| solve_neutral(black_box(&cfg)).unwrap()));
}

fn oracle(c: &mut Criterion) {
    let dist = IncomeDistribution::new(&BTreeMap::from([(-1, 0.35), (1, 0.4), (2, 0.25)])).unwrap();
    let cfg = ProblemConfig::new(Utility::Exponential, 0.5, -2.0, dist, 4).unwrap();
    let p = OracleProblem::from_config(&cfg, 4, Terminal::TailLower).unwrap();
    let mut g = c.benchmark_group("oracle");
    g.sample_size(10);
    g.bench_function("exp_h4_x4", |b| b.iter(|| exact_optimal(&p, black_box(4)).unwrap()));
    g.finish();
}

fn simulation(c: &mut Criterion) {
    let cfg = exp_config();
    let sol = solve_exp(&cfg).unwrap();
    let mut g = c.benchmark_group("simulate");
    g.sample_size(10);
    g.bench_function("10k_paths_x10", |b| {
        b.iter(|| simulate_paths(&cfg, &sol.policy, 10, 10_000, 10_000, black_box(7)).unwrap())
    });
    g.finish();
}

criterion_group!(benches, exponential, power, neutral, oracle, simulation);
criterion_main!(benches);
