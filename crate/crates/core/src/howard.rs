//! Policy iteration for the exponential criterion.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exp::{action_value, bellman_backup_exp, ExpModel, ExpPolicy, ExpValueTable, ValueRow};

pub const DEFAULT_MAX_ITERATIONS: usize = 1000;

/// A depth-indexed Markov decision rule on `x = 0..=x_max`; surplus above the
/// cap is paid out before the rule at the cap applies.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DecisionRule {
    pub actions: Vec<Vec<i64>>,
}

impl DecisionRule {
    pub fn pay_all(depth: usize, x_max: i64) -> Self {
        DecisionRule { actions: vec![(0..=x_max).collect(); depth] }
    }

    pub fn from_policy(policy: &ExpPolicy) -> Self {
        DecisionRule { actions: policy.actions.clone() }
    }

    pub fn into_policy(self) -> ExpPolicy {
        ExpPolicy::from_actions(self.actions)
    }

    pub fn depth(&self) -> usize {
        self.actions.len()
    }

    pub fn action(&self, n: usize, x: i64) -> i64 {
        let col = &self.actions[n];
        let x_max = col.len() as i64 - 1;
        match x {
            x if x < 0 => 0,
            x if x <= x_max => col[x as usize],
            x => x - x_max + col[x_max as usize],
        }
    }
}

fn check_admissible(rule: &DecisionRule, model: &ExpModel) -> Result<()> {
    let width = (model.x_max + 1) as usize;
    if rule.depth() != model.depth() || rule.actions.iter().any(|c| c.len() != width) {
        return Err(Error::InadmissiblePolicy {
            depth: 0,
            surplus: 0,
            reason: format!("rule shape does not match depth {} and cap {}", model.depth(), model.x_max),
        });
    }
    for (n, col) in rule.actions.iter().enumerate() {
        for (x, &a) in col.iter().enumerate() {
            let x = x as i64;
            let fail = |reason: String| Err(Error::InadmissiblePolicy { depth: n, surplus: x, reason });
            if !(0..=x).contains(&a) {
                return fail(format!("action {a} outside 0..={x}"));
            }
            if (x - a) as f64 > model.s_star {
                return fail(format!("keeps {} above the barrier bound {:.6}", x - a, model.s_star));
            }
        }
    }
    Ok(())
}

/// Bracketed value of following `rule` for `N` steps and optimally afterwards.
pub fn policy_value_exp(rule: &DecisionRule, model: &ExpModel) -> Result<ExpValueTable> {
    check_admissible(rule, model)?;
    let sched = &model.schedule;
    let mut rows = vec![model.tail_row()];
    for n in (0..model.depth()).rev() {
        let next = rows.last().unwrap();
        let (theta, theta_next) = (sched.theta(n), sched.theta(n + 1));
        let vals: Vec<_> = (0..=model.x_max)
            .into_par_iter()
            .map(|x| action_value(&model.dist, next, theta_next, theta, x, rule.action(n, x)))
            .collect();
        let mut row = ValueRow { lo: vec![1.0], hi: vec![1.0] };
        row.lo.extend(vals.iter().map(|b| b.lo));
        row.hi.extend(vals.iter().map(|b| b.hi));
        rows.push(row);
    }
    rows.reverse();
    Ok(ExpValueTable { thetas: sched.thetas.clone(), rows })
}

/// Largest greedy minimiser against the evaluated table.
pub fn improve(rule: &DecisionRule, value: &ExpValueTable, model: &ExpModel) -> Result<DecisionRule> {
    let sched = &model.schedule;
    let mut actions = Vec::with_capacity(rule.depth());
    for n in 0..rule.depth() {
        let (theta, theta_next) = (sched.theta(n), sched.theta(n + 1));
        let col: Vec<i64> = (0..=model.x_max)
            .into_par_iter()
            .map(|x| bellman_backup_exp(&model.dist, &value.rows[n + 1], theta_next, theta, x).action)
            .collect();
        actions.push(col);
    }
    let h = DecisionRule { actions };
    for n in 0..h.depth() {
        for x in 0..=model.x_max {
            let a = h.action(n, x);
            if h.action(n, x - a) != 0 {
                return Err(Error::InvariantViolation(format!(
                    "improved rule pays {a} at (n={n}, x={x}) but not zero at {}",
                    x - a
                )));
            }
            if (x - a) as f64 > model.s_star {
                return Err(Error::InvariantViolation(format!(
                    "improved rule keeps {} at (n={n}, x={x}), above the barrier bound",
                    x - a
                )));
            }
        }
    }
    Ok(h)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HowardStep {
    pub rule: DecisionRule,
    pub value: ExpValueTable,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HowardResult {
    pub table: ExpValueTable,
    pub policy: ExpPolicy,
    /// Evaluations performed, including the final one that produced no change.
    pub iterations: usize,
    /// Largest change of the upper bracket at depth 0 between the last two evaluations.
    pub final_gap: f64,
    pub steps: Vec<HowardStep>,
}

fn root_gap(a: &ExpValueTable, b: &ExpValueTable) -> f64 {
    a.rows[0].hi.iter().zip(&b.rows[0].hi).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

fn check_monotone(prev: &ExpValueTable, cur: &ExpValueTable, iteration: usize) -> Result<()> {
    for (n, (p, c)) in prev.rows.iter().zip(&cur.rows).enumerate() {
        for i in 0..p.hi.len() {
            let tol = (p.hi[i] - p.lo[i]).max(c.hi[i] - c.lo[i]) + 1e-12 * p.hi[i];
            if c.hi[i] > p.hi[i] + tol {
                return Err(Error::InvariantViolation(format!(
                    "value increased at iteration {iteration}, n={n}, x={}: {} > {}",
                    i as i64 - 1,
                    c.hi[i],
                    p.hi[i]
                )));
            }
        }
    }
    Ok(())
}

pub fn howard_solve(model: &ExpModel, f0: DecisionRule, max_iterations: usize) -> Result<HowardResult> {
    let mut rule = f0;
    let mut steps: Vec<HowardStep> = Vec::new();
    loop {
        let value = policy_value_exp(&rule, model)?;
        if let Some(prev) = steps.last() {
            check_monotone(&prev.value, &value, steps.len())?;
        }
        let gap = steps.last().map_or(0.0, |p| root_gap(&p.value, &value));
        let next = improve(&rule, &value, model)?;
        steps.push(HowardStep { rule: rule.clone(), value: value.clone() });
        if next == rule {
            return Ok(HowardResult {
                table: value,
                policy: rule.into_policy(),
                iterations: steps.len(),
                final_gap: gap,
                steps,
            });
        }
        if steps.len() >= max_iterations {
            return Err(Error::MaxIterations { iterations: steps.len(), gap });
        }
        rule = next;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exp::solve_exp_model;
    use crate::model::{IncomeDistribution, ProblemConfig, Utility};

    fn model(d: IncomeDistribution, gamma: f64, x_max: i64) -> ExpModel {
        let cfg = ProblemConfig::new(Utility::Exponential, 0.9, gamma, d, x_max).unwrap().with_tail_eps(1e-6);
        ExpModel::from_config(&cfg).unwrap()
    }

    #[test]
    fn pay_all_is_optimal_without_income() {
        let m = model(IncomeDistribution::degenerate(-1).unwrap(), -1.0, 5);
        let r = howard_solve(&m, DecisionRule::pay_all(m.depth(), 5), DEFAULT_MAX_ITERATIONS).unwrap();
        assert_eq!(r.iterations, 1);
        for x in 0..=5 {
            assert!(r.table.get(0, x).contains((-(x as f64)).exp()));
        }
    }

    #[test]
    fn reaches_value_iteration_rule() {
        let m = model(IncomeDistribution::two_point(0.6, 1).unwrap(), -0.5, 45);
        let vi = solve_exp_model(m.clone()).unwrap();
        let r = howard_solve(&m, DecisionRule::pay_all(m.depth(), 45), DEFAULT_MAX_ITERATIONS).unwrap();
        assert_eq!(r.policy, vi.policy);
        assert!(r.iterations > 1);
        for x in 0..=45 {
            let (a, b) = (r.table.get(0, x), vi.value(x));
            assert!((a.hi - b.hi).abs() <= a.width() + b.width() + 1e-15);
        }
    }

    #[test]
    fn optimal_start_is_a_fixed_point() {
        let m = model(IncomeDistribution::two_point(0.4, 2).unwrap(), -1.0, 45);
        let vi = solve_exp_model(m.clone()).unwrap();
        let r = howard_solve(&m, DecisionRule::from_policy(&vi.policy), DEFAULT_MAX_ITERATIONS).unwrap();
        assert_eq!(r.iterations, 1);
        assert_eq!(r.final_gap, 0.0);
    }

    #[test]
    fn hoarding_rule_is_rejected() {
        let m = model(IncomeDistribution::two_point(0.6, 1).unwrap(), -0.5, 45);
        let never = DecisionRule { actions: vec![vec![0; 46]; m.depth()] };
        assert!(matches!(policy_value_exp(&never, &m), Err(Error::InadmissiblePolicy { .. })));
    }

    #[test]
    fn iteration_cap_is_reported() {
        let m = model(IncomeDistribution::two_point(0.6, 1).unwrap(), -0.5, 45);
        let err = howard_solve(&m, DecisionRule::pay_all(m.depth(), 45), 1).unwrap_err();
        assert!(matches!(err, Error::MaxIterations { iterations: 1, .. }));
    }
}
