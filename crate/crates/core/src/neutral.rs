//! Risk-neutral baseline: maximise expected discounted dividends.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bands::BandFunction;
use crate::bracket::Bracket;
use crate::error::{Error, Result};
use crate::exp::TIE_REL_TOL;
use crate::model::{IncomeDistribution, ProblemConfig, Utility};

pub const MAX_VALUE_ITERATIONS: usize = 1_000_000;

/// Upper bound on the risk-neutral barrier (the small-risk limit of the
/// exponential barrier bound).
pub fn neutral_barrier_bound(dist: &IncomeDistribution, beta: f64) -> f64 {
    let ez = dist.mean_positive_part();
    let p_neg = dist.ruin_mass();
    beta * ez * (1.0 / (1.0 - beta) - 1.0 / (1.0 - beta + beta * p_neg)) / (1.0 - beta)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NeutralSolution {
    /// Brackets on `V(x)` for `x = 0..=x_max`.
    pub values: Vec<Bracket>,
    /// Stationary largest maximiser for `x = 0..=x_max`.
    pub policy: Vec<i64>,
    pub band: BandFunction,
    pub iterations: usize,
}

impl NeutralSolution {
    pub fn action(&self, x: i64) -> i64 {
        let x_max = self.policy.len() as i64 - 1;
        match x {
            x if x < 0 => 0,
            x if x <= x_max => self.policy[x as usize],
            x => x - x_max + self.policy[x_max as usize],
        }
    }
}

fn eval(v: &[f64], x: i64) -> f64 {
    let x_max = v.len() as i64 - 1;
    if x < 0 {
        0.0
    } else if x <= x_max {
        v[x as usize]
    } else {
        (x - x_max) as f64 + v[x_max as usize]
    }
}

fn candidates<'a>(dist: &'a IncomeDistribution, beta: f64, v: &'a [f64], x: i64) -> impl Iterator<Item = f64> + 'a {
    (0..=x).map(move |a| {
        let cont: f64 = dist.iter().map(|(k, q)| q * eval(v, x - a + k)).sum();
        a as f64 + beta * cont
    })
}

pub fn solve_neutral(cfg: &ProblemConfig) -> Result<NeutralSolution> {
    cfg.validate()?;
    if cfg.utility != Utility::RiskNeutral {
        return Err(Error::InvalidConfig(format!("expected risk_neutral utility, got {}", cfg.utility)));
    }
    let (dist, beta) = (&cfg.dist, cfg.beta);
    let required = neutral_barrier_bound(dist, beta).floor() as i64;
    if cfg.x_max < required {
        return Err(Error::CapTooSmall { x_max: cfg.x_max, required });
    }
    let over = beta * dist.mean_positive_part() / (1.0 - beta);
    let mut v: Vec<f64> = (0..=cfg.x_max).map(|x| x as f64 + over).collect();
    // Stop once the a-posteriori error bound beta/(1-beta) * diff is below tail_eps.
    let stop = cfg.tail_eps * (1.0 - beta) / beta;
    let mut diff = f64::INFINITY;
    let mut iterations = 0;
    while diff > stop {
        if iterations == MAX_VALUE_ITERATIONS {
            return Err(Error::MaxIterations { iterations, gap: diff });
        }
        let next: Vec<f64> = (0..=cfg.x_max)
            .into_par_iter()
            .map(|x| candidates(dist, beta, &v, x).fold(f64::NEG_INFINITY, f64::max))
            .collect();
        diff = v.iter().zip(&next).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        v = next;
        iterations += 1;
    }
    let err = beta / (1.0 - beta) * diff;
    let values = v.iter().map(|&x| Bracket::new(x - err, x + err)).collect();
    let policy: Vec<i64> = (0..=cfg.x_max)
        .map(|x| {
            let c: Vec<f64> = candidates(dist, beta, &v, x).collect();
            let best = c.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            c.iter().rposition(|&y| y >= best - TIE_REL_TOL * best.abs()).unwrap_or(0) as i64
        })
        .collect();
    let band = BandFunction::from_column(&policy)?;
    Ok(NeutralSolution { values, policy, band, iterations })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn downward_income_pays_everything() {
        let d = IncomeDistribution::degenerate(-1).unwrap();
        let cfg = ProblemConfig::new(Utility::RiskNeutral, 0.9, 0.0, d, 5).unwrap();
        let sol = solve_neutral(&cfg).unwrap();
        for x in 0..=5 {
            assert!(sol.values[x as usize].contains_within(x as f64, 1e-12));
            assert_eq!(sol.action(x), x);
        }
    }

    #[test]
    fn two_point_family_is_a_barrier() {
        for (p, claim) in [(0.6, 1), (0.4, 2), (0.7, 3)] {
            let d = IncomeDistribution::two_point(p, claim).unwrap();
            let cfg = ProblemConfig::new(Utility::RiskNeutral, 0.9, 0.0, d.clone(), 60).unwrap();
            let sol = solve_neutral(&cfg).unwrap();
            assert_eq!(sol.band.bands(), 0, "p={p} claim={claim}: {}", sol.band);
            assert!(sol.band.top() as f64 <= neutral_barrier_bound(&d, 0.9));
        }
    }

    #[test]
    fn barrier_bound_formula() {
        let d = IncomeDistribution::two_point(0.6, 1).unwrap();
        let b = neutral_barrier_bound(&d, 0.9);
        let r = 0.9 * 0.6 / (1.0 - 0.9 * 0.6);
        assert!((b - (0.9 * 0.6 / 0.1 - r) / 0.1).abs() < 1e-9);
    }

    #[test]
    fn cap_is_checked() {
        let d = IncomeDistribution::two_point(0.6, 1).unwrap();
        let cfg = ProblemConfig::new(Utility::RiskNeutral, 0.9, 0.0, d, 3).unwrap();
        assert!(matches!(solve_neutral(&cfg), Err(Error::CapTooSmall { .. })));
    }
}
