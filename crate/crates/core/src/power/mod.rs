//! Power and logarithmic utility on the extended state (surplus, accumulated dividends).
//!
//! Depth `d` stores `W_d(x, s)` where `s = y0 + sum_{m<d} beta^m a_m` is the
//! discounted dividend total so far; `W_d(x, s)` is the best expected utility
//! of `s` plus all future discounted dividends when `N - d` backups remain.

pub mod checks;
pub mod grid;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bracket::Bracket;
use crate::error::{Error, Result};
use crate::exp::TIE_REL_TOL;
use crate::model::{certainty_equivalent, IncomeDistribution, ProblemConfig, Utility};
use grid::{reachable_lattices, Position, SGrid};

/// Upper limit on automatically chosen depths.
pub const MAX_DEPTH: usize = 20_000;

/// Uniform bound on the power-case barrier, `beta EZ⁺ / (1 - beta)^2`.
pub fn xi_star_bound(dist: &IncomeDistribution, beta: f64) -> f64 {
    beta * dist.mean_positive_part() / ((1.0 - beta) * (1.0 - beta))
}

/// Utility applied to accumulated dividends.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Hara {
    Power(f64),
    Log,
}

impl Hara {
    pub fn u(&self, w: f64) -> f64 {
        match *self {
            Hara::Power(g) => w.powf(g),
            Hara::Log => w.ln(),
        }
    }

    pub fn inverse(&self, v: f64) -> f64 {
        match *self {
            Hara::Power(g) => v.max(0.0).powf(1.0 / g),
            Hara::Log => v.exp(),
        }
    }

    /// `|u''(w)|`.
    pub fn curvature(&self, w: f64) -> f64 {
        match *self {
            Hara::Power(g) => g * (1.0 - g) * w.powf(g - 2.0),
            Hara::Log => 1.0 / (w * w),
        }
    }

    fn utility(&self) -> Utility {
        match self {
            Hara::Power(_) => Utility::Power,
            Hara::Log => Utility::Logarithmic,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PowerModel {
    pub dist: IncomeDistribution,
    pub beta: f64,
    pub hara: Hara,
    pub x_max: i64,
    pub depth: usize,
    pub y0: f64,
    /// Mean discounted future income bound `beta EZ⁺ / (1 - beta)`.
    pub income_bound: f64,
    pub grids: Vec<SGrid>,
    pub tail_eps: f64,
    discounts: Vec<f64>,
}

impl PowerModel {
    pub fn from_config(cfg: &ProblemConfig) -> Result<Self> {
        Self::build(cfg, true)
    }

    /// Same as [`PowerModel::from_config`] but with uniform grids only.
    pub fn uniform_from_config(cfg: &ProblemConfig) -> Result<Self> {
        Self::build(cfg, false)
    }

    fn build(cfg: &ProblemConfig, lattice: bool) -> Result<Self> {
        cfg.validate()?;
        let hara = match cfg.utility {
            Utility::Power => Hara::Power(cfg.gamma),
            Utility::Logarithmic => {
                if cfg.y0 <= 0.0 {
                    return Err(Error::DomainError("log utility needs initial dividends y0 > 0".into()));
                }
                Hara::Log
            }
            other => return Err(Error::InvalidConfig(format!("expected power or log utility, got {other}"))),
        };
        let (dist, beta) = (&cfg.dist, cfg.beta);
        let required = xi_star_bound(dist, beta).floor() as i64;
        if cfg.x_max < required {
            return Err(Error::CapTooSmall { x_max: cfg.x_max, required });
        }
        let income_bound = beta * dist.mean_positive_part() / (1.0 - beta);
        let depth = match cfg.depth {
            Some(n) => {
                let width = tail_bound(hara, cfg.y0, beta, income_bound, n);
                if width > cfg.tail_eps {
                    return Err(Error::DepthTooSmall { depth: n, width, tolerance: cfg.tail_eps });
                }
                n
            }
            None => (1..=MAX_DEPTH)
                .find(|&n| tail_bound(hara, cfg.y0, beta, income_bound, n) <= 0.9 * cfg.tail_eps)
                .ok_or(Error::DepthTooSmall {
                    depth: MAX_DEPTH,
                    width: tail_bound(hara, cfg.y0, beta, income_bound, MAX_DEPTH),
                    tolerance: cfg.tail_eps,
                })?,
        };
        let overflow = dist.support_max().max(0);
        let step_max = cfg.x_max + overflow;
        let span = step_max as f64 / (1.0 - beta);
        let base = SGrid::uniform(cfg.y0, span, cfg.s_grid_points);
        let grids = if lattice {
            reachable_lattices(cfg.y0, beta, step_max, overflow, depth)
                .into_iter()
                .map(|lat| match lat {
                    Some(pts) => base.clone().with_lattice(&pts),
                    None => base.clone(),
                })
                .collect()
        } else {
            vec![base; depth]
        };
        let discounts = (0..=depth).map(|d| beta.powi(d as i32)).collect();
        Ok(PowerModel {
            dist: dist.clone(),
            beta,
            hara,
            x_max: cfg.x_max,
            depth,
            y0: cfg.y0,
            income_bound,
            grids,
            tail_eps: cfg.tail_eps,
            discounts,
        })
    }

    pub fn discount(&self, d: usize) -> f64 {
        self.discounts[d]
    }

    /// Proven bounds `u(s + beta^d x) <= W_d(x, s) <= u(s + beta^d (x + c))`.
    pub fn envelope(&self, d: usize, x: i64, s: f64) -> Bracket {
        let b = self.discount(d);
        Bracket::new(self.hara.u(s + b * x as f64), self.hara.u(s + b * (x as f64 + self.income_bound)))
    }
}

/// Largest tail-closure width, attained at `x = 0`, `s = y0`.
pub fn tail_bound(hara: Hara, y0: f64, beta: f64, income_bound: f64, depth: usize) -> f64 {
    let lift = beta.powi(depth as i32) * income_bound;
    match hara {
        Hara::Power(_) => hara.u(y0 + lift) - hara.u(y0),
        Hara::Log => (lift / y0).ln_1p(),
    }
}

/// Bracketed values and greedy actions at one depth, indexed `x * len + i`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DepthTable {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
    pub action: Vec<u32>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PowerValueTable {
    pub depths: Vec<DepthTable>,
}

/// Values one level below the depth being backed up.
#[derive(Clone, Copy)]
pub enum NextRow<'a> {
    /// The deepest level, closed by the envelope.
    Tail,
    Table(&'a DepthTable),
}

impl PowerModel {
    fn entry(&self, d: usize, t: &DepthTable, x: i64, i: usize) -> Bracket {
        let k = x as usize * self.grids[d].len() + i;
        Bracket::new(t.lo[k], t.hi[k])
    }

    /// `W_d(x, s)` for any surplus and any `s >= y0`.
    pub fn eval(&self, d: usize, next: NextRow<'_>, x: i64, s: f64) -> Bracket {
        if x < 0 {
            return Bracket::point(self.hara.u(s));
        }
        if x > self.x_max {
            let s = s + self.discount(d) * (x - self.x_max) as f64;
            return self.eval(d, next, self.x_max, s);
        }
        let table = match next {
            NextRow::Tail => return self.envelope(d, x, s),
            NextRow::Table(t) => t,
        };
        let grid = &self.grids[d];
        let env = self.envelope(d, x, s);
        match grid.locate(s) {
            Position::Hit(i) => self.entry(d, table, x, i),
            Position::Between(i) => {
                let (s0, s1) = (grid.points[i], grid.points[i + 1]);
                let (a, b) = (self.entry(d, table, x, i), self.entry(d, table, x, i + 1));
                let t = (s - s0) / (s1 - s0);
                let h = s1 - s0;
                let pad = h * h / 8.0 * self.hara.curvature(s0 + self.discount(d) * x as f64);
                let lo = ((1.0 - t) * a.lo + t * b.lo - pad).max(a.lo).max(env.lo);
                let hi = ((1.0 - t) * a.hi + t * b.hi + pad).min(b.hi).min(env.hi);
                Bracket::new(lo.min(hi), hi.max(lo))
            }
            Position::Above => {
                let last = self.entry(d, table, x, grid.len() - 1);
                Bracket::new(env.lo.max(last.lo).min(env.hi), env.hi)
            }
            Position::Below => env,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PowerBackup {
    pub value: Bracket,
    pub action: i64,
}

/// One backup at `(d, x, s)`: best expected value over dividends, largest
/// maximiser of the lower bracket end.
pub fn t_backup(model: &PowerModel, next: NextRow<'_>, d: usize, x: i64, s: f64) -> PowerBackup {
    let b = model.discount(d);
    let mut cands = Vec::with_capacity(x as usize + 1);
    for a in 0..=x {
        let s_a = s + b * a as f64;
        let (mut lo, mut hi) = (0.0, 0.0);
        for (k, q) in model.dist.iter() {
            let v = model.eval(d + 1, next, x - a + k, s_a);
            lo += q * v.lo;
            hi += q * v.hi;
        }
        cands.push((lo, hi));
    }
    let best_lo = cands.iter().map(|c| c.0).fold(f64::NEG_INFINITY, f64::max);
    let best_hi = cands.iter().map(|c| c.1).fold(f64::NEG_INFINITY, f64::max);
    let action = cands.iter().rposition(|c| c.0 >= best_lo - TIE_REL_TOL * best_lo.abs()).unwrap_or(0) as i64;
    PowerBackup { value: Bracket::new(best_lo, best_hi.max(best_lo)), action }
}

/// Greedy rule at every `(d, x, grid point)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PowerPolicy {
    pub beta: f64,
    pub x_max: i64,
    pub grids: Vec<SGrid>,
    pub actions: Vec<Vec<u32>>,
}

impl PowerPolicy {
    pub fn depth(&self) -> usize {
        self.actions.len()
    }

    /// Stored action at a grid point.
    pub fn at(&self, d: usize, x: i64, i: usize) -> i64 {
        self.actions[d][x as usize * self.grids[d].len() + i] as i64
    }

    /// Action at time `t` with accumulated dividends `s`, read at the nearest
    /// lower grid point. Beyond the solved depth the depth-0 rule is used with
    /// `s` rescaled to the same `y = s / beta^t`.
    pub fn action(&self, t: usize, x: i64, s: f64) -> i64 {
        if x < 0 {
            return 0;
        }
        let (d, s) = if t < self.depth() { (t, s) } else { (0, s / self.beta.powi(t as i32)) };
        if x > self.x_max {
            let over = x - self.x_max;
            return over + self.action_at_depth(d, self.x_max, s + self.beta.powi(d as i32) * over as f64);
        }
        self.action_at_depth(d, x, s)
    }

    fn action_at_depth(&self, d: usize, x: i64, s: f64) -> i64 {
        self.at(d, x, self.grids[d].floor_index(s))
    }

    /// Largest surplus with a zero action at grid point `i` of depth `d`.
    pub fn barrier(&self, d: usize, i: usize) -> i64 {
        (0..=self.x_max).rev().find(|&x| self.at(d, x, i) == 0).unwrap_or(0)
    }

    pub fn max_barrier(&self) -> i64 {
        (0..self.depth())
            .flat_map(|d| (0..self.grids[d].len()).map(move |i| (d, i)))
            .map(|(d, i)| self.barrier(d, i))
            .max()
            .unwrap_or(0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PowerSolution {
    pub model: PowerModel,
    pub table: PowerValueTable,
    pub policy: PowerPolicy,
    /// Brackets on the optimal expected utility from `(x, y0)`, `x = 0..=x_max`.
    pub j_hat: Vec<Bracket>,
}

impl PowerSolution {
    pub fn value(&self, x: i64) -> Bracket {
        if x < 0 {
            Bracket::point(self.model.hara.u(self.model.y0))
        } else {
            self.j_hat[x as usize]
        }
    }

    /// Certainty equivalent of the discounted dividends, from the lower bracket end.
    pub fn certainty_equivalent(&self, x: i64) -> Result<f64> {
        let u = self.model.hara.utility();
        let g = match self.model.hara {
            Hara::Power(g) => g,
            Hara::Log => 0.0,
        };
        Ok(certainty_equivalent(u, g, self.value(x).lo)? - self.model.y0)
    }

    /// Bracket at a stored grid point.
    pub fn table_value(&self, d: usize, x: i64, i: usize) -> Bracket {
        self.model.entry(d, &self.table.depths[d], x, i)
    }

    pub fn root_width(&self) -> f64 {
        self.j_hat.iter().map(Bracket::width).fold(0.0, f64::max)
    }
}

pub fn solve_power(cfg: &ProblemConfig) -> Result<PowerSolution> {
    if cfg.utility != Utility::Power {
        return Err(Error::InvalidConfig(format!("expected power utility, got {}", cfg.utility)));
    }
    solve_power_model(PowerModel::from_config(cfg)?)
}

pub fn solve_log(cfg: &ProblemConfig) -> Result<PowerSolution> {
    if cfg.utility != Utility::Logarithmic {
        return Err(Error::InvalidConfig(format!("expected logarithmic utility, got {}", cfg.utility)));
    }
    solve_power_model(PowerModel::from_config(cfg)?)
}

pub fn solve_power_model(model: PowerModel) -> Result<PowerSolution> {
    let n = model.depth;
    let mut depths: Vec<DepthTable> = Vec::with_capacity(n);
    for d in (0..n).rev() {
        let next = match depths.last() {
            None => NextRow::Tail,
            Some(t) => NextRow::Table(t),
        };
        let grid = &model.grids[d];
        let m = grid.len();
        let cells: Vec<PowerBackup> = (0..(model.x_max as usize + 1) * m)
            .into_par_iter()
            .map(|k| t_backup(&model, next, d, (k / m) as i64, grid.points[k % m]))
            .collect();
        depths.push(DepthTable {
            lo: cells.iter().map(|c| c.value.lo).collect(),
            hi: cells.iter().map(|c| c.value.hi).collect(),
            action: cells.iter().map(|c| c.action as u32).collect(),
        });
    }
    depths.reverse();
    let root = &depths[0];
    let i0 = model.grids[0].hit(model.y0).ok_or_else(|| Error::InvariantViolation("y0 missing from grid".into()))?;
    let m0 = model.grids[0].len();
    let j_hat = (0..=model.x_max as usize).map(|x| Bracket::new(root.lo[x * m0 + i0], root.hi[x * m0 + i0])).collect();
    let policy = PowerPolicy {
        beta: model.beta,
        x_max: model.x_max,
        grids: model.grids.clone(),
        actions: depths.iter().map(|t| t.action.clone()).collect(),
    };
    Ok(PowerSolution { model, table: PowerValueTable { depths }, policy, j_hat })
}

/// Barrier per `(d, grid point)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BarrierRow {
    pub d: usize,
    pub s: f64,
    pub xi: i64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BarrierReport {
    pub bound: f64,
    pub rows: Vec<BarrierRow>,
    pub max_xi: i64,
    pub shift_pairs_checked: usize,
}

/// Barriers at every grid point, checked against the uniform bound and the
/// band-shift property on grid pairs `(x0, s)`, `(x0 + 1, s - beta^d)`.
pub fn barrier_diagnostics(sol: &PowerSolution) -> Result<BarrierReport> {
    let bound = xi_star_bound(&sol.model.dist, sol.model.beta);
    let policy = &sol.policy;
    let mut rows = Vec::new();
    let mut checked = 0;
    for d in 0..policy.depth() {
        let grid = &policy.grids[d];
        let b = sol.model.discount(d);
        for i in 0..grid.len() {
            let xi = policy.barrier(d, i);
            if xi as f64 > bound.floor() {
                return Err(Error::BarrierViolation(format!(
                    "barrier {xi} at depth {d}, s = {} exceeds bound {bound}",
                    grid.points[i]
                )));
            }
            rows.push(BarrierRow { d, s: grid.points[i], xi });
            let Some(j) = grid.hit(grid.points[i] - b) else { continue };
            for x0 in 0..policy.x_max {
                let (a0, a1) = (policy.at(d, x0, i), policy.at(d, x0 + 1, j));
                checked += 1;
                if a1 > 0 && a1 != a0 + 1 {
                    return Err(Error::BarrierViolation(format!(
                        "band shift fails at depth {d}, x0 = {x0}, s = {}: actions {a0} and {a1}",
                        grid.points[i]
                    )));
                }
            }
        }
    }
    let max_xi = rows.iter().map(|r| r.xi).max().unwrap_or(0);
    Ok(BarrierReport { bound, rows, max_xi, shift_pairs_checked: checked })
}
