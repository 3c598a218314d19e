//! Structural properties of power/log solutions, checked on stored grid points.

use serde::Serialize;

use super::{xi_star_bound, PowerSolution};
use crate::exp::checks::{Violation, CHECK_REL_SLACK};

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct PowerCheckReport {
    pub violations: Vec<Violation>,
    pub entries: usize,
    pub shift_pairs: usize,
    pub pay_down_pairs: usize,
    pub band_shift_pairs: usize,
}

impl PowerCheckReport {
    pub fn is_clean(&self) -> bool {
        self.violations.is_empty()
    }
}

fn leq(a: f64, b: f64) -> bool {
    a <= b + CHECK_REL_SLACK * a.abs().max(b.abs()).max(1e-300)
}

/// Envelope, monotonicity in `s`, shift inequality, pay-down, barrier bound and
/// band shift. Pair properties are checked wherever the partner point is on the grid.
pub fn check_power_invariants(sol: &PowerSolution) -> PowerCheckReport {
    let mut rep = PowerCheckReport::default();
    let model = &sol.model;
    let policy = &sol.policy;
    let bound = xi_star_bound(&model.dist, model.beta).floor() as i64;
    for d in 0..model.depth {
        let grid = &model.grids[d];
        let b = model.discount(d);
        for i in 0..grid.len() {
            let s = grid.points[i];
            let mut push = |rule, x, detail: String| rep.violations.push(Violation { rule, depth: d, x, detail });
            let xi = policy.barrier(d, i);
            if xi > bound {
                push("barrier", xi, format!("barrier {xi} above bound at s = {s}"));
            }
            for x in 0..=model.x_max {
                rep.entries += 1;
                let v = sol.table_value(d, x, i);
                let env = model.envelope(d, x, s);
                #[allow(clippy::neg_cmp_op_on_partial_ord)]
                if !(v.lo <= v.hi) {
                    push("sandwich", x, format!("{v:?} at s = {s}"));
                }
                if !leq(env.lo, v.lo) || !leq(v.hi, env.hi) {
                    push("envelope", x, format!("{v:?} outside {env:?} at s = {s}"));
                }
                if i + 1 < grid.len() {
                    let w = sol.table_value(d, x, i + 1);
                    if !leq(v.lo, w.lo) || !leq(v.hi, w.hi) {
                        push("monotone_in_s", x, format!("{v:?} then {w:?} at s = {s}"));
                    }
                }
                for step in 1..=x {
                    if let Some(j) = grid.hit(s + b * step as f64) {
                        rep.shift_pairs += 1;
                        let w = sol.table_value(d, x - step, j);
                        if !leq(w.lo, v.lo) {
                            push("shift", x, format!("paying {step} first gives {} > {} at s = {s}", w.lo, v.lo));
                        }
                    }
                }
                let a = policy.at(d, x, i);
                if let Some(j) = grid.hit(s + b * a as f64) {
                    rep.pay_down_pairs += 1;
                    let after = policy.at(d, x - a, j);
                    if after != 0 {
                        push("pay_down", x, format!("pays {a}, then {after} at s = {s}"));
                    }
                }
            }
            if let Some(j) = grid.hit(s - b) {
                for x0 in 0..model.x_max {
                    rep.band_shift_pairs += 1;
                    let (a0, a1) = (policy.at(d, x0, i), policy.at(d, x0 + 1, j));
                    if a1 > 0 && a1 != a0 + 1 {
                        push("band_shift", x0, format!("actions {a0} then {a1} at s = {s}"));
                    }
                }
            }
        }
    }
    rep
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{IncomeDistribution, ProblemConfig, Utility};
    use crate::power::solve_power;
    use std::collections::BTreeMap;

    fn solve() -> PowerSolution {
        let d = IncomeDistribution::new(&BTreeMap::from([(-1, 0.5), (1, 0.5)])).unwrap();
        let cfg = ProblemConfig::new(Utility::Power, 0.5, 0.5, d, 3)
            .unwrap()
            .with_depth(4)
            .with_tail_eps(10.0)
            .with_grid_points(128);
        solve_power(&cfg).unwrap()
    }

    #[test]
    fn solved_instance_is_clean() {
        let rep = check_power_invariants(&solve());
        assert!(rep.is_clean(), "{:?}", &rep.violations[..rep.violations.len().min(5)]);
        assert!(rep.shift_pairs > 0 && rep.pay_down_pairs > 0 && rep.band_shift_pairs > 0);
    }

    #[test]
    fn corrupted_values_are_caught() {
        let mut sol = solve();
        let m = sol.model.grids[1].len();
        sol.table.depths[1].lo[2 * m + 3] = -1.0;
        let rules: Vec<_> = check_power_invariants(&sol).violations.iter().map(|v| v.rule).collect();
        assert!(rules.contains(&"envelope"));
    }
}
