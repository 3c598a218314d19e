//! Structural properties every exponential solution must satisfy.

use serde::Serialize;

use super::ExpSolution;
use crate::bands::extract_bands;

/// Relative slack absorbing rounding in the bound comparisons.
pub const CHECK_REL_SLACK: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Violation {
    pub rule: &'static str,
    pub depth: usize,
    pub x: i64,
    pub detail: String,
}

fn leq(a: f64, b: f64, slack: f64) -> bool {
    a <= b + slack + CHECK_REL_SLACK * a.abs().max(b.abs())
}

/// Runs every value and policy check; an empty result means all hold.
pub fn check_exp_invariants(sol: &ExpSolution) -> Vec<Violation> {
    let mut out = Vec::new();
    check_values(sol, &mut out);
    check_policy(sol, &mut out);
    out
}

pub fn check_values(sol: &ExpSolution, out: &mut Vec<Violation>) {
    let sched = &sol.model.schedule;
    let x_max = sol.model.x_max;
    for n in 0..=sol.table.depth() {
        let theta = sched.theta(n);
        let (hl, hu) = (sched.h_lower(n).lo, sched.h_upper(n).hi);
        let mut push = |rule, x, detail: String| out.push(Violation { rule, depth: n, x, detail });
        let ruined = sol.table.get(n, -1);
        if ruined.lo != 1.0 || ruined.hi != 1.0 {
            push("sandwich", -1, format!("ruined value {ruined:?}"));
        }
        for x in 0..=x_max {
            let b = sol.table.get(n, x);
            if !(b.lo > 0.0 && b.lo <= b.hi && b.hi <= 1.0) {
                push("sandwich", x, format!("{b:?}"));
            }
            let env = (theta * x as f64).exp();
            if !leq(env * hl, b.lo, 0.0) {
                push("envelope", x, format!("lower bound {} above {}", env * hl, b.lo));
            }
            if !leq(b.hi, env * hu, 0.0) {
                push("envelope", x, format!("upper {} above bound {}", b.hi, env * hu));
            }
            if x >= 1 {
                let prev = sol.table.get(n, x - 1);
                let tol = b.width().max(prev.width());
                let f = theta.exp();
                if !leq(b.lo, f * prev.lo, tol) || !leq(b.hi, f * prev.hi, tol) {
                    push("multiplicative_decrease", x, format!("{b:?} vs e^theta * {prev:?}"));
                }
            }
        }
    }
}

pub fn check_policy(sol: &ExpSolution, out: &mut Vec<Violation>) {
    let policy = &sol.policy;
    let x_max = sol.model.x_max;
    let bound = sol.model.s_star.floor() as i64;
    for n in 0..policy.depth() {
        let mut push = |rule, x, detail: String| out.push(Violation { rule, depth: n, x, detail });
        let xi = policy.xi[n];
        if xi > bound {
            push("barrier", xi, format!("barrier {xi} above bound {}", sol.model.s_star));
        }
        for x in 0..=x_max {
            let a = policy.action(n, x);
            if !(0..=x).contains(&a) {
                push("admissible", x, format!("action {a}"));
                continue;
            }
            let after = policy.action(n, x - a);
            if after != 0 {
                push("pay_down", x, format!("pays {a}, then {after} at {}", x - a));
            }
            if x > xi && a != x - xi {
                push("barrier", x, format!("action {a} above barrier {xi}"));
            }
            if x < x_max {
                let next = policy.action(n, x + 1);
                if next > 0 && next != a + 1 {
                    push("band_shift", x, format!("actions {a} then {next}"));
                }
            }
        }
    }
    if let Err(e) = extract_bands(policy) {
        out.push(Violation { rule: "band_function", depth: 0, x: 0, detail: e.to_string() });
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exp::{solve_exp, ExpPolicy};
    use crate::model::{IncomeDistribution, ProblemConfig, Utility};

    fn solve(p: f64, claim: i64, gamma: f64) -> ExpSolution {
        let d = IncomeDistribution::two_point(p, claim).unwrap();
        let cfg = ProblemConfig::new(Utility::Exponential, 0.9, gamma, d, 45).unwrap().with_tail_eps(1e-6);
        solve_exp(&cfg).unwrap()
    }

    #[test]
    fn solved_instance_is_clean() {
        let sol = solve(0.6, 1, -1.0);
        assert_eq!(check_exp_invariants(&sol), vec![]);
    }

    #[test]
    fn corrupted_policy_is_caught() {
        let mut sol = solve(0.4, 2, -0.1);
        let x_max = sol.model.x_max as usize;
        let mut actions = sol.policy.actions.clone();
        actions[0] = (0..=x_max as i64).map(|x| x.min(1)).collect();
        sol.policy = ExpPolicy::from_actions(actions);
        let rules: Vec<_> = check_exp_invariants(&sol).iter().map(|v| v.rule).collect();
        assert!(rules.contains(&"pay_down"));
        assert!(rules.contains(&"band_function"));
    }

    #[test]
    fn corrupted_values_are_caught() {
        let mut sol = solve(0.6, 1, -1.0);
        sol.table.rows[2].lo[4] = 1e-300;
        let rules: Vec<_> = check_exp_invariants(&sol).iter().map(|v| v.rule).collect();
        assert!(rules.contains(&"envelope"));

        let mut sol = solve(0.6, 1, -1.0);
        let v = sol.table.rows[2].hi[4];
        sol.table.rows[2].lo[5] = v;
        sol.table.rows[2].hi[5] = v;
        let rules: Vec<_> = check_exp_invariants(&sol).iter().map(|v| v.rule).collect();
        assert!(rules.contains(&"multiplicative_decrease"));
    }
}
