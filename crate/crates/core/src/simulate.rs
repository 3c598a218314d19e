//! Monte Carlo simulation of the surplus process under a dividend rule.
//!
//! Path `i` draws its incomes from ChaCha8 seeded with `seed` on stream `i`
//! (`ChaCha8Rng::seed_from_u64(seed)` followed by `set_stream(i)`), one
//! `u in [0, 1)` per period mapped through the inverse CDF of the income
//! distribution in ascending support order. Results do not depend on the
//! thread count.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exp::ExpPolicy;
use crate::howard::DecisionRule;
use crate::model::{IncomeDistribution, ProblemConfig, Utility};
use crate::neutral::NeutralSolution;
use crate::oracle::{PayAll, PayNothing};
use crate::power::PowerPolicy;

pub const DEFAULT_MAX_STEPS: usize = 10_000;

/// A rule mapping `(period, surplus, y0 + accumulated discounted dividends)` to a dividend.
pub trait DividendRule: Sync {
    fn action(&self, t: usize, x: i64, s: f64) -> Option<i64>;

    /// Largest surplus the rule ever keeps after paying, if bounded.
    fn max_barrier(&self) -> Option<i64>;
}

/// Beyond the solved depth the last column is used.
impl DividendRule for ExpPolicy {
    fn action(&self, t: usize, x: i64, _s: f64) -> Option<i64> {
        Some(ExpPolicy::action(self, t.min(self.depth() - 1), x))
    }
    fn max_barrier(&self) -> Option<i64> {
        Some(ExpPolicy::max_barrier(self))
    }
}

impl DividendRule for DecisionRule {
    fn action(&self, t: usize, x: i64, _s: f64) -> Option<i64> {
        Some(DecisionRule::action(self, t.min(self.depth() - 1), x))
    }
    fn max_barrier(&self) -> Option<i64> {
        self.actions.iter().map(|col| col.iter().rposition(|&a| a == 0).unwrap_or(0) as i64).max()
    }
}

impl DividendRule for PowerPolicy {
    fn action(&self, t: usize, x: i64, s: f64) -> Option<i64> {
        Some(PowerPolicy::action(self, t, x, s))
    }
    fn max_barrier(&self) -> Option<i64> {
        Some(PowerPolicy::max_barrier(self))
    }
}

impl DividendRule for NeutralSolution {
    fn action(&self, _t: usize, x: i64, _s: f64) -> Option<i64> {
        Some(NeutralSolution::action(self, x))
    }
    fn max_barrier(&self) -> Option<i64> {
        Some(self.band.top())
    }
}

impl DividendRule for PayAll {
    fn action(&self, _t: usize, x: i64, _s: f64) -> Option<i64> {
        Some(x.max(0))
    }
    fn max_barrier(&self) -> Option<i64> {
        Some(0)
    }
}

impl DividendRule for PayNothing {
    fn action(&self, _t: usize, _x: i64, _s: f64) -> Option<i64> {
        Some(0)
    }
    fn max_barrier(&self) -> Option<i64> {
        None
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PathRecord {
    pub discounted_dividends: f64,
    pub utility: f64,
    /// First period with negative surplus.
    pub ruin_time: Option<usize>,
    pub truncated: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationSummary {
    pub n_paths: usize,
    pub mean_utility: f64,
    pub std_err: f64,
    pub ruin_fraction: f64,
    pub mean_ruin_time: Option<f64>,
    pub truncated_fraction: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Simulation {
    pub paths: Vec<PathRecord>,
    pub summary: SimulationSummary,
}

fn pairwise_sum(v: &[f64]) -> f64 {
    match v.len() {
        0 => 0.0,
        1 => v[0],
        n if n <= 8 => v.iter().sum(),
        n => pairwise_sum(&v[..n / 2]) + pairwise_sum(&v[n / 2..]),
    }
}

/// Mean and standard error, both exact when all samples coincide.
fn mean_and_se(v: &[f64]) -> (f64, f64) {
    let n = v.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let c = v[0];
    let dev: Vec<f64> = v.iter().map(|u| u - c).collect();
    let shift = pairwise_sum(&dev) / n as f64;
    if n == 1 {
        return (c + shift, 0.0);
    }
    let sq: Vec<f64> = dev.iter().map(|d| (d - shift) * (d - shift)).collect();
    let var = pairwise_sum(&sq) / (n - 1) as f64;
    (c + shift, (var / n as f64).sqrt())
}

fn sampler(dist: &IncomeDistribution) -> (Vec<i64>, Vec<f64>) {
    let mut acc = 0.0;
    dist.iter()
        .map(|(k, q)| {
            acc += q;
            (k, acc)
        })
        .unzip()
}

fn draw(support: &[i64], cdf: &[f64], u: f64) -> i64 {
    let i = cdf.partition_point(|&c| c <= u);
    support[i.min(support.len() - 1)]
}

#[allow(clippy::too_many_arguments)]
fn run_path(
    cfg: &ProblemConfig,
    rule: &dyn DividendRule,
    support: &[i64],
    cdf: &[f64],
    x0: i64,
    max_steps: usize,
    seed: u64,
    path: u64,
) -> Result<PathRecord> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(path);
    let y0 = match cfg.utility {
        Utility::Power | Utility::Logarithmic => cfg.y0,
        _ => 0.0,
    };
    let (mut x, mut sum, mut disc) = (x0, 0.0, 1.0);
    let mut ruin_time = (x0 < 0).then_some(0);
    let mut t = 0;
    while ruin_time.is_none() && t < max_steps {
        let a = match rule.action(t, x, y0 + sum) {
            Some(a) if (0..=x).contains(&a) => a,
            _ => return Err(Error::PolicyUndefined { step: t, surplus: x }),
        };
        sum += disc * a as f64;
        disc *= cfg.beta;
        x = x - a + draw(support, cdf, rng.random::<f64>());
        t += 1;
        if x < 0 {
            ruin_time = Some(t);
        }
    }
    Ok(PathRecord { discounted_dividends: sum, utility: cfg.utility_of(sum)?, ruin_time, truncated: ruin_time.is_none() })
}

/// Simulates `n_paths` independent paths from `x0`, each for at most `max_steps` periods.
pub fn simulate_paths(
    cfg: &ProblemConfig,
    rule: &dyn DividendRule,
    x0: i64,
    n_paths: usize,
    max_steps: usize,
    seed: u64,
) -> Result<Simulation> {
    cfg.validate()?;
    if n_paths == 0 {
        return Err(Error::InvalidConfig("n_paths must be positive".into()));
    }
    let (support, cdf) = sampler(&cfg.dist);
    let paths: Vec<PathRecord> = (0..n_paths as u64)
        .into_par_iter()
        .map(|i| run_path(cfg, rule, &support, &cdf, x0, max_steps, seed, i))
        .collect::<Result<_>>()?;
    let utilities: Vec<f64> = paths.iter().map(|p| p.utility).collect();
    let (mean_utility, std_err) = mean_and_se(&utilities);
    let ruin_times: Vec<f64> = paths.iter().filter_map(|p| p.ruin_time.map(|t| t as f64)).collect();
    let n = n_paths as f64;
    let summary = SimulationSummary {
        n_paths,
        mean_utility,
        std_err,
        ruin_fraction: ruin_times.len() as f64 / n,
        mean_ruin_time: (!ruin_times.is_empty()).then(|| pairwise_sum(&ruin_times) / ruin_times.len() as f64),
        truncated_fraction: paths.iter().filter(|p| p.truncated).count() as f64 / n,
    };
    Ok(Simulation { paths, summary })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RuinCheck {
    pub n_paths: usize,
    pub max_steps: usize,
    pub ruin_fraction: f64,
    pub sigma: f64,
    /// Largest surplus kept after paying; `None` when the rule never pays down.
    pub xi: Option<i64>,
    pub p_neg: f64,
    /// Lower bound on the ruin probability by `max_steps`; `None` outside the precondition.
    pub bound: Option<f64>,
    pub passed: Option<bool>,
}

/// Ruin probability by `max_steps` is at least `1 - (1 - p_neg^(xi+1))^floor(max_steps/(xi+1))`:
/// after paying, the surplus is at most `xi`, so `xi + 1` consecutive negative incomes ruin.
pub fn ruin_certainty_check(
    cfg: &ProblemConfig,
    rule: &dyn DividendRule,
    x0: i64,
    n_paths: usize,
    max_steps: usize,
    seed: u64,
) -> Result<RuinCheck> {
    let sim = simulate_paths(cfg, rule, x0, n_paths, max_steps, seed)?;
    Ok(assess_ruin(cfg, rule, &sim.summary, max_steps))
}

/// The ruin bound applied to an existing simulation run for `max_steps` periods.
pub fn assess_ruin(cfg: &ProblemConfig, rule: &dyn DividendRule, summary: &SimulationSummary, max_steps: usize) -> RuinCheck {
    let f = summary.ruin_fraction;
    let sigma = (f * (1.0 - f) / summary.n_paths as f64).sqrt();
    let p_neg = cfg.dist.ruin_mass();
    let xi = rule.max_barrier();
    let bound = xi.map(|xi| {
        let block = (xi + 1) as f64;
        let blocks = (max_steps as f64 / block).floor();
        1.0 - (1.0 - p_neg.powf(block)).powf(blocks)
    });
    RuinCheck {
        n_paths: summary.n_paths,
        max_steps,
        ruin_fraction: f,
        sigma,
        xi,
        p_neg,
        bound,
        passed: bound.map(|b| f >= b - 5.0 * sigma),
    }
}
