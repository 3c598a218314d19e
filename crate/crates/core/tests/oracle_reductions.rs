use std::collections::BTreeMap;

use dividend_core::oracle::{
    best_markov_rule, exact_optimal, exact_optimal_unmerged, exact_policy_value, path_probability_total, OracleProblem,
    PayAll, PayNothing, PowerRule, Terminal,
};
use dividend_core::{solve_exp, solve_power, IncomeDistribution, ProblemConfig, Utility};
use num_traits::One;

fn dists() -> Vec<IncomeDistribution> {
    [
        vec![(-1, 0.5), (1, 0.5)],
        vec![(-1, 0.4), (1, 0.6)],
        vec![(-2, 0.3), (1, 0.7)],
        vec![(-1, 0.3), (0, 0.3), (2, 0.4)],
    ]
    .into_iter()
    .map(|v| IncomeDistribution::new(&v.into_iter().collect::<BTreeMap<_, _>>()).unwrap())
    .collect()
}

#[test]
fn exponential_optimum_over_histories_is_attained_by_markov_rules() {
    // Incomes of at most +1 keep the number of Markov rules enumerable.
    for dist in &dists()[..3] {
        for (beta, gamma) in [(0.5, -2.0), (0.8, -0.5)] {
            for horizon in 1..=3 {
                let cfg = ProblemConfig::new(Utility::Exponential, beta, gamma, dist.clone(), 3).unwrap();
                let p = OracleProblem::from_config(&cfg, horizon, Terminal::TailLower).unwrap();
                for x0 in 0..=(if horizon == 3 { 2 } else { 3 }) {
                    let tree = exact_optimal(&p, x0).unwrap();
                    let (markov, rule) = best_markov_rule(&p, x0, 1_000_000).unwrap();
                    let tol = 1e-15 * tree.value.abs();
                    assert!((tree.value - markov).abs() <= tol, "{horizon} {x0}: {} vs {markov}", tree.value);
                    assert!((exact_policy_value(&p, &rule, x0).unwrap() - markov).abs() <= tol);
                }
            }
        }
    }
}

#[test]
fn power_optimum_depends_on_history_only_through_surplus_and_dividends() {
    for dist in dists() {
        for gamma in [0.3, 0.7] {
            for horizon in 1..=3 {
                let cfg = ProblemConfig::new(Utility::Power, 0.5, gamma, dist.clone(), 3).unwrap();
                for terminal in [Terminal::Stop, Terminal::TailLower] {
                    let p = OracleProblem::from_config(&cfg, horizon, terminal).unwrap();
                    for x0 in 0..=3 {
                        let merged = exact_optimal(&p, x0).unwrap();
                        let full = exact_optimal_unmerged(&p, x0).unwrap();
                        assert_eq!(merged.value_text, full.value_text);
                    }
                }
            }
        }
    }
}

#[test]
fn path_probabilities_sum_to_one_exactly() {
    for dist in dists() {
        let cfg = ProblemConfig::new(Utility::Exponential, 0.8, -0.5, dist, 3).unwrap();
        let p = OracleProblem::from_config(&cfg, 3, Terminal::Stop).unwrap();
        let opt = exact_optimal(&p, 2).unwrap();
        for total in [
            path_probability_total(&p, &opt, 2).unwrap(),
            path_probability_total(&p, &PayAll, 2).unwrap(),
            path_probability_total(&p, &PayNothing, 2).unwrap(),
        ] {
            assert!(total.is_one(), "{total}");
        }
    }
}

#[test]
fn zero_dividends_have_unit_exponential_value() {
    let cfg = ProblemConfig::new(Utility::Exponential, 0.8, -1.0, dists()[1].clone(), 3).unwrap();
    for horizon in 1..=4 {
        let p = OracleProblem::from_config(&cfg, horizon, Terminal::Stop).unwrap();
        assert_eq!(exact_policy_value(&p, &PayNothing, 2).unwrap(), 1.0);
    }
}

#[test]
fn solver_policies_evaluate_to_solver_values() {
    let dist = dists()[3].clone();
    let cfg = ProblemConfig::new(Utility::Exponential, 0.5, -2.0, dist.clone(), 4).unwrap().with_depth(4).with_tail_eps(1.0);
    let sol = solve_exp(&cfg).unwrap();
    let p = OracleProblem::from_config(&cfg, 4, Terminal::TailLower).unwrap();
    for x in 0..=4 {
        let v = exact_policy_value(&p, &sol.policy, x).unwrap();
        assert!((v - sol.value(x).lo).abs() < 1e-14, "{x}: {v} vs {:?}", sol.value(x));
    }

    let cfg = ProblemConfig::new(Utility::Power, 0.5, 0.5, dist, 4).unwrap().with_depth(3).with_tail_eps(100.0);
    let sol = solve_power(&cfg).unwrap();
    let p = OracleProblem::from_config(&cfg, 3, Terminal::TailLower).unwrap();
    let rule = PowerRule { policy: &sol.policy, y0: cfg.y0 };
    for x in 0..=4 {
        let v = exact_policy_value(&p, &rule, x).unwrap();
        assert!((v - sol.value(x).lo).abs() < 1e-14, "{x}: {v} vs {:?}", sol.value(x));
    }
}

#[test]
fn oversized_trees_are_refused() {
    let d = IncomeDistribution::new(&BTreeMap::from([(-1, 0.2), (0, 0.2), (1, 0.2), (2, 0.2), (3, 0.2)])).unwrap();
    let cfg = ProblemConfig::new(Utility::Exponential, 0.8, -0.5, d, 12).unwrap();
    let p = OracleProblem::from_config(&cfg, 12, Terminal::Stop).unwrap();
    assert!(matches!(exact_optimal_unmerged(&p, 12), Err(dividend_core::Error::TooLarge { .. })));
}
