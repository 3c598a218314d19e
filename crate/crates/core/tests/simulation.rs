use std::collections::BTreeMap;

use dividend_core::oracle::PayAll;
use dividend_core::{h_upper, simulate_paths, solve_exp, IncomeDistribution, ProblemConfig, Utility};

#[test]
fn optimal_exponential_policy_matches_solver_bracket() {
    let dist = IncomeDistribution::two_point(0.6, 1).unwrap();
    let gamma = -0.5;
    let cfg = ProblemConfig::new(Utility::Exponential, 0.9, gamma, dist, 45).unwrap();
    let sol = solve_exp(&cfg).unwrap();
    for x0 in [0, 3, 6] {
        let sim = simulate_paths(&cfg, &sol.policy, x0, 1_000_000, 10_000, 99).unwrap();
        // Utility is e^{gamma w} / gamma, so the criterion E e^{gamma w} is gamma times its mean.
        let mean = gamma * sim.summary.mean_utility;
        let se = gamma.abs() * sim.summary.std_err;
        let j = sol.value(x0);
        assert_eq!(sim.summary.truncated_fraction, 0.0);
        assert!(mean >= j.lo - 4.0 * se && mean <= j.hi + 4.0 * se, "x0={x0}: {mean} +- {se} vs {j:?}");
    }
}

#[test]
fn pay_all_value_matches_upper_recursion() {
    let dist = IncomeDistribution::new(&BTreeMap::from([(-1, 0.5), (1, 0.5)])).unwrap();
    let cfg = ProblemConfig::new(Utility::Exponential, 0.5, -1.0, dist.clone(), 3).unwrap();
    let sim = simulate_paths(&cfg, &PayAll, 0, 1_000_000, 200, 5).unwrap();
    let mean = -sim.summary.mean_utility;
    let se = sim.summary.std_err;
    let h = h_upper(&dist, 0.5, -1.0);
    assert!(mean >= h.lo - 3.0 * se && mean <= h.hi + 3.0 * se, "{mean} +- {se} vs {h:?}");
}

#[test]
fn thread_count_does_not_change_results() {
    let cfg = ProblemConfig::new(Utility::Power, 0.9, 0.5, IncomeDistribution::two_point(0.55, 1).unwrap(), 5).unwrap();
    let run = |threads| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap()
            .install(|| simulate_paths(&cfg, &PayAll, 4, 5_000, 10_000, 3).unwrap())
    };
    assert_eq!(run(1), run(3));
}
