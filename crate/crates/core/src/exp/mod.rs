//! Exponential utility: bracketed value function on the risk-parameter orbit.

pub mod checks;
pub mod schedule;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bracket::Bracket;
use crate::error::{Error, Result};
use crate::model::{certainty_equivalent, IncomeDistribution, ProblemConfig, Utility};
use schedule::{required_depth, ThetaSchedule};

/// Relative tolerance under which two candidate values count as tied.
pub const TIE_REL_TOL: f64 = 1e-12;

// Outward rounding applied after every backup.
const BACKUP_PAD: f64 = 8.0 * f64::EPSILON;

/// Whether `v` ties or beats the best (smallest) value `best`.
pub(crate) fn ties_min(v: f64, best: f64) -> bool {
    v <= best + TIE_REL_TOL * best.abs()
}

/// Problem data shared by the value-iteration and policy-iteration solvers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExpModel {
    pub dist: IncomeDistribution,
    pub schedule: ThetaSchedule,
    pub x_max: i64,
    pub s_star: f64,
    pub tail_eps: f64,
    pub explicit_depth: bool,
}

impl ExpModel {
    pub fn from_config(cfg: &ProblemConfig) -> Result<Self> {
        cfg.validate()?;
        if cfg.utility != Utility::Exponential {
            return Err(Error::InvalidConfig(format!("expected exponential utility, got {}", cfg.utility)));
        }
        let depth = match cfg.depth {
            Some(n) => n,
            None => required_depth(&cfg.dist, cfg.beta, cfg.gamma, cfg.tail_eps)?,
        };
        let schedule = ThetaSchedule::new(&cfg.dist, cfg.beta, cfg.gamma, depth);
        let s_star = schedule.s_star();
        // The barrier is an integer no larger than s*.
        let required = s_star.floor() as i64;
        if cfg.x_max < required {
            return Err(Error::CapTooSmall { x_max: cfg.x_max, required });
        }
        Ok(ExpModel {
            dist: cfg.dist.clone(),
            schedule,
            x_max: cfg.x_max,
            s_star,
            tail_eps: cfg.tail_eps,
            explicit_depth: cfg.depth.is_some(),
        })
    }

    pub fn depth(&self) -> usize {
        self.schedule.depth()
    }

    pub fn gamma(&self) -> f64 {
        self.schedule.gamma
    }

    /// Tail closure at the deepest level: `e^{theta_N x}` times the bounds on `h`.
    pub fn tail_row(&self) -> ValueRow {
        let n = self.depth();
        let theta = self.schedule.theta(n);
        let (ln_lo, ln_hi) = (self.schedule.ln_h_lower(n).lo, self.schedule.ln_h_upper(n).hi);
        let mut row = ValueRow::ruined_only(self.x_max);
        for x in 0..=self.x_max {
            let i = (x + 1) as usize;
            row.lo[i] = (theta * x as f64 + ln_lo).exp() * (1.0 - BACKUP_PAD);
            row.hi[i] = (theta * x as f64 + ln_hi).exp().min(1.0);
        }
        row
    }
}

/// Bracketed values at one depth for `x = -1..=x_max`; index `x + 1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValueRow {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

impl ValueRow {
    fn ruined_only(x_max: i64) -> Self {
        let len = (x_max + 2) as usize;
        ValueRow { lo: vec![1.0; len], hi: vec![1.0; len] }
    }

    pub fn x_max(&self) -> i64 {
        self.lo.len() as i64 - 2
    }

    /// Value at any surplus; above the cap the excess is paid out at once.
    pub fn eval(&self, x: i64, theta: f64) -> Bracket {
        if x < 0 {
            return Bracket::point(1.0);
        }
        let x_max = self.x_max();
        if x <= x_max {
            let i = (x + 1) as usize;
            Bracket::new(self.lo[i], self.hi[i])
        } else {
            let i = (x_max + 1) as usize;
            let f = (theta * (x - x_max) as f64).exp();
            Bracket::new(f * self.lo[i], f * self.hi[i])
        }
    }

    pub fn max_width(&self) -> f64 {
        self.lo.iter().zip(&self.hi).map(|(l, h)| h - l).fold(0.0, f64::max)
    }
}

/// Continuation value `sum_k q_k J(v + k)` from post-dividend surplus `v`.
pub fn continuation(dist: &IncomeDistribution, next: &ValueRow, theta_next: f64, v: i64) -> Bracket {
    let (mut lo, mut hi) = (0.0, 0.0);
    for (k, q) in dist.iter() {
        let b = next.eval(v + k, theta_next);
        lo += q * b.lo;
        hi += q * b.hi;
    }
    Bracket::new(lo, hi)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Backup {
    pub value: Bracket,
    pub action: i64,
}

fn pad(lo: f64, hi: f64) -> Bracket {
    Bracket::new(lo * (1.0 - BACKUP_PAD), (hi * (1.0 + BACKUP_PAD)).min(1.0))
}

/// Value of paying `a` at surplus `x` and continuing with `next`.
pub fn action_value(dist: &IncomeDistribution, next: &ValueRow, theta_next: f64, theta: f64, x: i64, a: i64) -> Bracket {
    let g = continuation(dist, next, theta_next, x - a);
    let f = (theta * a as f64).exp();
    pad(f * g.lo, f * g.hi)
}

/// One Bellman step at `(theta, x)`: minimum over dividends of both bracket
/// ends, and the largest minimiser of the lower end.
pub fn bellman_backup_exp(dist: &IncomeDistribution, next: &ValueRow, theta_next: f64, theta: f64, x: i64) -> Backup {
    let candidates: Vec<Bracket> = (0..=x)
        .map(|a| {
            let g = continuation(dist, next, theta_next, x - a);
            let f = (theta * a as f64).exp();
            Bracket::new(f * g.lo, f * g.hi)
        })
        .collect();
    let min_lo = candidates.iter().map(|c| c.lo).fold(f64::INFINITY, f64::min);
    let min_hi = candidates.iter().map(|c| c.hi).fold(f64::INFINITY, f64::min);
    let action = candidates.iter().rposition(|c| ties_min(c.lo, min_lo)).unwrap_or(0) as i64;
    Backup { value: pad(min_lo, min_hi), action }
}

/// Bracketed `J(x, theta_n)` for `n = 0..=N`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExpValueTable {
    pub thetas: Vec<f64>,
    pub rows: Vec<ValueRow>,
}

impl ExpValueTable {
    pub fn depth(&self) -> usize {
        self.rows.len() - 1
    }

    pub fn x_max(&self) -> i64 {
        self.rows[0].x_max()
    }

    pub fn get(&self, n: usize, x: i64) -> Bracket {
        self.rows[n].eval(x, self.thetas[n])
    }

    /// Widest bracket among `x = 0..=x_max` at depth 0.
    pub fn root_width(&self) -> f64 {
        self.rows[0].max_width()
    }
}

/// Decision rule per depth with the barrier at each depth.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExpPolicy {
    /// `actions[n][x]` for `n < N`, `x = 0..=x_max`.
    pub actions: Vec<Vec<i64>>,
    pub xi: Vec<i64>,
}

impl ExpPolicy {
    pub fn from_actions(actions: Vec<Vec<i64>>) -> Self {
        let xi = actions.iter().map(|col| barrier_of(col)).collect();
        ExpPolicy { actions, xi }
    }

    pub fn depth(&self) -> usize {
        self.actions.len()
    }

    pub fn x_max(&self) -> i64 {
        self.actions[0].len() as i64 - 1
    }

    /// Action at depth `n`; surplus above the cap is paid out before applying the rule at the cap.
    pub fn action(&self, n: usize, x: i64) -> i64 {
        if x < 0 {
            return 0;
        }
        let col = &self.actions[n];
        let x_max = col.len() as i64 - 1;
        if x <= x_max {
            col[x as usize]
        } else {
            x - x_max + col[x_max as usize]
        }
    }

    pub fn max_barrier(&self) -> i64 {
        self.xi.iter().copied().max().unwrap_or(0)
    }
}

/// Largest surplus with a zero action.
pub(crate) fn barrier_of(col: &[i64]) -> i64 {
    col.iter().rposition(|&a| a == 0).unwrap_or(0) as i64
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExpSolution {
    pub model: ExpModel,
    pub table: ExpValueTable,
    pub policy: ExpPolicy,
}

impl ExpSolution {
    /// Bracket on `J(x, gamma)`.
    pub fn value(&self, x: i64) -> Bracket {
        self.table.get(0, x)
    }

    /// Bracket on the optimal expected utility `J / gamma`.
    pub fn expected_utility(&self, x: i64) -> Bracket {
        let j = self.value(x);
        let g = self.model.gamma();
        Bracket::new(j.hi / g, j.lo / g)
    }

    pub fn certainty_equivalent(&self, x: i64) -> Result<Bracket> {
        let eu = self.expected_utility(x);
        let g = self.model.gamma();
        let lo = certainty_equivalent(Utility::Exponential, g, eu.lo)?;
        let hi = certainty_equivalent(Utility::Exponential, g, eu.hi)?;
        Ok(Bracket::new(lo, hi))
    }
}

pub fn solve_exp(cfg: &ProblemConfig) -> Result<ExpSolution> {
    solve_exp_model(ExpModel::from_config(cfg)?)
}

pub fn solve_exp_model(model: ExpModel) -> Result<ExpSolution> {
    let depth = model.depth();
    let mut rows = vec![model.tail_row()];
    let mut actions = Vec::with_capacity(depth);
    for n in (0..depth).rev() {
        let (theta, theta_next) = (model.schedule.theta(n), model.schedule.theta(n + 1));
        let next = rows.last().unwrap();
        let backups: Vec<Backup> = (0..=model.x_max)
            .into_par_iter()
            .map(|x| bellman_backup_exp(&model.dist, next, theta_next, theta, x))
            .collect();
        let mut row = ValueRow::ruined_only(model.x_max);
        for (i, b) in backups.iter().enumerate() {
            row.lo[i + 1] = b.value.lo;
            row.hi[i + 1] = b.value.hi;
        }
        actions.push(backups.iter().map(|b| b.action).collect::<Vec<_>>());
        rows.push(row);
    }
    rows.reverse();
    actions.reverse();
    let table = ExpValueTable { thetas: model.schedule.thetas.clone(), rows };
    let width = table.root_width();
    if model.explicit_depth && width > model.tail_eps {
        return Err(Error::DepthTooSmall { depth, width, tolerance: model.tail_eps });
    }
    Ok(ExpSolution { model, table, policy: ExpPolicy::from_actions(actions) })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::BTreeMap;

    fn cfg(dist: IncomeDistribution, beta: f64, gamma: f64, x_max: i64) -> ProblemConfig {
        ProblemConfig::new(Utility::Exponential, beta, gamma, dist, x_max).unwrap()
    }

    #[test]
    fn downward_income_pays_everything() {
        let d = IncomeDistribution::degenerate(-1).unwrap();
        let sol = solve_exp(&cfg(d, 0.9, -1.0, 6)).unwrap();
        for x in 0..=6 {
            let want = (-(x as f64)).exp();
            let got = sol.value(x);
            assert!(got.contains(want), "x={x}: {got:?} vs {want}");
            assert!(got.width() <= 1e-8);
            assert_eq!(sol.policy.action(0, x), x);
        }
        assert_eq!(sol.policy.xi, vec![0; sol.policy.depth()]);
        assert_eq!(sol.value(-1), Bracket::point(1.0));
    }

    #[test]
    fn zero_surplus_has_single_action() {
        let d = IncomeDistribution::new(&BTreeMap::from([(-1, 0.5), (1, 0.5)])).unwrap();
        let s = ThetaSchedule::new(&d, 0.5, -1.0, 3);
        let m = ExpModel { dist: d.clone(), schedule: s, x_max: 3, s_star: 0.0, tail_eps: 1.0, explicit_depth: true };
        let next = m.tail_row();
        let b = bellman_backup_exp(&d, &next, -0.5, -1.0, 0);
        assert_eq!(b.action, 0);
        let g = continuation(&d, &next, -0.5, 0);
        assert!(b.value.contains_within(g.lo, 1e-15) && b.value.contains_within(g.hi, 1e-15));
    }

    #[test]
    fn two_action_comparison_matches_hand_sum() {
        // x = 1 on the symmetric walk, next row = tail closure.
        let d = IncomeDistribution::new(&BTreeMap::from([(-1, 0.5), (1, 0.5)])).unwrap();
        let s = ThetaSchedule::new(&d, 0.5, -1.0, 1);
        let m = ExpModel { dist: d.clone(), schedule: s.clone(), x_max: 3, s_star: 0.0, tail_eps: 1.0, explicit_depth: true };
        let next = m.tail_row();
        let (t1, hl) = (s.theta(1), s.h_lower(1).lo);
        let keep = 0.5 * (t1 * 0.0).exp() * hl + 0.5 * (t1 * 2.0).exp() * hl;
        let pay = (-1.0f64).exp() * (0.5 + 0.5 * (t1 * 1.0).exp() * hl);
        let b = bellman_backup_exp(&d, &next, t1, -1.0, 1);
        assert!((b.value.lo - keep.min(pay)).abs() < 1e-14);
        assert_eq!(b.action, if pay <= keep { 1 } else { 0 });
    }

    #[test]
    fn cap_too_small_is_rejected() {
        let d = IncomeDistribution::two_point(0.6, 1).unwrap();
        let err = solve_exp(&cfg(d, 0.9, -0.1, 3)).unwrap_err();
        assert!(matches!(err, Error::CapTooSmall { x_max: 3, .. }), "{err:?}");
    }

    #[test]
    fn explicit_shallow_depth_is_reported() {
        let d = IncomeDistribution::two_point(0.6, 1).unwrap();
        let c = cfg(d, 0.9, -1.0, 45).with_depth(3);
        assert!(matches!(solve_exp(&c), Err(Error::DepthTooSmall { depth: 3, .. })));
        assert!(solve_exp(&c.with_tail_eps(1.0)).is_ok());
    }

    #[test]
    fn brackets_tighten_with_depth() {
        let d = IncomeDistribution::two_point(0.6, 1).unwrap();
        let base = cfg(d, 0.9, -1.0, 45).with_tail_eps(1.0);
        let a = solve_exp(&base.clone().with_depth(10)).unwrap();
        let b = solve_exp(&base.with_depth(15)).unwrap();
        for x in 0..=45 {
            let (wa, wb) = (a.value(x), b.value(x));
            assert!(wb.width() <= wa.width() + 1e-15);
            assert!(wa.intersects(&wb, 1e-15));
        }
    }

    #[test]
    fn cap_extension_matches_larger_cap() {
        let d = IncomeDistribution::two_point(0.6, 1).unwrap();
        let base = cfg(d, 0.9, -1.0, 45).with_tail_eps(1e-6);
        let small = solve_exp(&base).unwrap();
        let big = solve_exp(&base.with_x_max(60)).unwrap();
        for x in 0..=60 {
            let (a, b) = (small.value(x), big.value(x));
            assert!(a.intersects(&b, 1e-14), "x={x}: {a:?} vs {b:?}");
            assert_eq!(small.policy.action(0, x), big.policy.action(0, x));
        }
    }

    #[test]
    fn certainty_equivalent_is_nonnegative() {
        let d = IncomeDistribution::two_point(0.6, 1).unwrap();
        let sol = solve_exp(&cfg(d, 0.9, -0.5, 45)).unwrap();
        let ce = sol.certainty_equivalent(5).unwrap();
        assert!(ce.lo >= 5.0 - 1e-6 && ce.hi >= ce.lo, "{ce:?}");
    }
}
