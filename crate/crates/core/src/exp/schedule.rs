use serde::{Deserialize, Serialize};

use crate::bracket::Bracket;
use crate::error::{Error, Result};
use crate::model::IncomeDistribution;

/// Upper limit on automatically chosen depths.
pub const MAX_DEPTH: usize = 100_000;

const MAX_TERMS: usize = 200_000;

/// Number of geometric terms after which `beta^K` drops below `e^-37 ≈ 1e-16`.
fn series_terms(beta: f64) -> usize {
    ((37.0 / -beta.ln()).ceil() as usize).clamp(1, MAX_TERMS)
}

fn rounding_pad(terms: usize) -> f64 {
    4.0 * (terms as f64 + 4.0) * f64::EPSILON
}

/// `E exp(t Z⁺)` for `t <= 0`.
pub fn mgf_plus(dist: &IncomeDistribution, t: f64) -> f64 {
    dist.iter().map(|(k, q)| q * (t * k.max(0) as f64).exp()).sum()
}

/// `ln E exp(t Z⁺)`, accurate also for `t` near zero.
pub fn ln_mgf_plus(dist: &IncomeDistribution, t: f64) -> f64 {
    let dev: f64 = dist
        .iter()
        .filter(|&(k, _)| k > 0)
        .map(|(k, q)| q * (t * k as f64).exp_m1())
        .sum();
    dev.ln_1p()
}

/// Bracket on `ln` of the infinite product `prod_{k>=1} E exp(theta beta^k Z⁺)`.
pub fn ln_h_lower(dist: &IncomeDistribution, beta: f64, theta: f64) -> Bracket {
    let terms = series_terms(beta);
    let ez = dist.mean_positive_part();
    let mut partial = 0.0;
    let mut t = theta;
    for _ in 0..terms {
        t *= beta;
        partial += ln_mgf_plus(dist, t);
    }
    // Jensen: each remaining factor is at least exp(theta beta^k EZ⁺).
    let tail = t * beta * ez / (1.0 - beta);
    let pad = rounding_pad(terms) * partial.abs();
    Bracket::new(partial + tail - pad, (partial + pad).min(0.0))
}

/// Bracket on `ln` of the expected discounted exponential reward of the
/// pay-everything policy, started from one income draw.
pub fn ln_h_upper(dist: &IncomeDistribution, beta: f64, theta: f64) -> Bracket {
    // E(theta) = 1 - D(theta) satisfies
    //   E(theta) = sum_{m>=0} q_m (1 - e^{theta beta m}) + sum_{m>=0} q_m e^{theta beta m} E(theta beta),
    // with E in [0, 1 - h_lower] at the end of the orbit.
    let terms = series_terms(beta);
    let orbit: Vec<f64> = std::iter::successors(Some(theta), |t| Some(t * beta)).take(terms + 1).collect();
    let tail_theta = orbit[terms];
    let mut e_lo = 0.0;
    let mut e_hi = -ln_h_lower(dist, beta, tail_theta).lo.exp_m1();
    for &t in orbit[..terms].iter().rev() {
        let (mut a, mut b) = (0.0, 0.0);
        for (m, q) in dist.iter().filter(|&(m, _)| m >= 0) {
            let tm = t * beta * m as f64;
            a += q * -tm.exp_m1();
            b += q * tm.exp();
        }
        e_lo = a + b * e_lo;
        e_hi = a + b * e_hi;
    }
    let pad = rounding_pad(terms);
    let e_lo = (e_lo * (1.0 - pad)).max(0.0);
    let e_hi = (e_hi * (1.0 + pad)).min(1.0);
    Bracket::new((-e_hi).ln_1p(), (-e_lo).ln_1p())
}

pub fn h_lower(dist: &IncomeDistribution, beta: f64, theta: f64) -> Bracket {
    ln_h_lower(dist, beta, theta).exp()
}

pub fn h_upper(dist: &IncomeDistribution, beta: f64, theta: f64) -> Bracket {
    ln_h_upper(dist, beta, theta).exp()
}

/// Conservative upper value of the barrier bound at `theta`.
pub fn s_bound(dist: &IncomeDistribution, beta: f64, theta: f64) -> f64 {
    s_from_logs(&ln_h_lower(dist, beta, theta), &ln_h_upper(dist, beta, theta), beta, theta)
}

fn s_from_logs(ln_lower: &Bracket, ln_upper: &Bracket, beta: f64, theta: f64) -> f64 {
    ((ln_upper.hi - ln_lower.lo) / (theta * (beta - 1.0))).max(0.0)
}

/// Worst-case width of the depth-`depth` tail closure, `h_upper - h_lower` at `gamma beta^depth`.
pub fn tail_width(dist: &IncomeDistribution, beta: f64, gamma: f64, depth: usize) -> f64 {
    let theta = gamma * beta.powi(depth as i32);
    (h_upper(dist, beta, theta).hi - h_lower(dist, beta, theta).lo).max(0.0)
}

/// Smallest depth whose tail closure is narrower than `tail_eps`.
pub fn required_depth(dist: &IncomeDistribution, beta: f64, gamma: f64, tail_eps: f64) -> Result<usize> {
    // Leave room for rounding padding accumulated during backward induction.
    let target = 0.9 * tail_eps;
    let mut width = f64::INFINITY;
    for depth in 1..=MAX_DEPTH {
        width = tail_width(dist, beta, gamma, depth);
        if width <= target {
            return Ok(depth);
        }
    }
    Err(Error::DepthTooSmall { depth: MAX_DEPTH, width, tolerance: tail_eps })
}

/// The deterministic risk-parameter orbit `theta_n = gamma beta^n`, with tail
/// brackets precomputed at every depth.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThetaSchedule {
    pub gamma: f64,
    pub beta: f64,
    pub thetas: Vec<f64>,
    ln_lower: Vec<Bracket>,
    ln_upper: Vec<Bracket>,
}

impl ThetaSchedule {
    pub fn new(dist: &IncomeDistribution, beta: f64, gamma: f64, depth: usize) -> Self {
        let thetas: Vec<f64> = (0..=depth).map(|n| gamma * beta.powi(n as i32)).collect();
        let ln_lower = thetas.iter().map(|&t| ln_h_lower(dist, beta, t)).collect();
        let ln_upper = thetas.iter().map(|&t| ln_h_upper(dist, beta, t)).collect();
        ThetaSchedule { gamma, beta, thetas, ln_lower, ln_upper }
    }

    pub fn depth(&self) -> usize {
        self.thetas.len() - 1
    }

    pub fn theta(&self, n: usize) -> f64 {
        self.thetas[n]
    }

    pub fn ln_h_lower(&self, n: usize) -> Bracket {
        self.ln_lower[n]
    }

    pub fn ln_h_upper(&self, n: usize) -> Bracket {
        self.ln_upper[n]
    }

    pub fn h_lower(&self, n: usize) -> Bracket {
        self.ln_lower[n].exp()
    }

    pub fn h_upper(&self, n: usize) -> Bracket {
        self.ln_upper[n].exp()
    }

    pub fn s_bound(&self, n: usize) -> f64 {
        s_from_logs(&self.ln_lower[n], &self.ln_upper[n], self.beta, self.thetas[n])
    }

    /// Largest barrier bound over the schedule.
    pub fn s_star(&self) -> f64 {
        (0..=self.depth()).map(|n| self.s_bound(n)).fold(0.0, f64::max)
    }
}
