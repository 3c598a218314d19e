use std::collections::BTreeMap;
use std::fmt;
use std::ops::RangeInclusive;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Allowed deviation of the raw probability sum from 1.
pub const NORMALIZATION_TOL: f64 = 1e-12;

// Inputs already summing to 1 up to accumulated rounding are left untouched,
// which keeps validation idempotent.
const RENORMALIZE_THRESHOLD: f64 = 1e-14;

/// Finite-support law of the per-period integer income `Z`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "BTreeMap<i64, f64>", into = "BTreeMap<i64, f64>")]
pub struct IncomeDistribution {
    support_min: i64,
    probs: Vec<f64>,
}

impl IncomeDistribution {
    pub fn new(raw: &BTreeMap<i64, f64>) -> Result<Self> {
        validate_distribution(raw)
    }

    /// `P(Z = 1) = p`, `P(Z = -claim) = 1 - p`.
    pub fn two_point(p: f64, claim: i64) -> Result<Self> {
        if !(0.0..=1.0).contains(&p) {
            return Err(Error::InvalidConfig(format!("two-point probability {p} outside [0, 1]")));
        }
        if claim < 1 {
            return Err(Error::InvalidConfig(format!("claim size {claim} must be at least 1")));
        }
        let mut raw = BTreeMap::new();
        raw.insert(1, p);
        raw.insert(-claim, 1.0 - p);
        validate_distribution(&raw)
    }

    /// Point mass at `k`; only valid for negative `k`.
    pub fn degenerate(k: i64) -> Result<Self> {
        validate_distribution(&BTreeMap::from([(k, 1.0)]))
    }

    pub fn support_min(&self) -> i64 {
        self.support_min
    }

    pub fn support_max(&self) -> i64 {
        self.support_min + self.probs.len() as i64 - 1
    }

    pub fn prob(&self, k: i64) -> f64 {
        if k < self.support_min || k > self.support_max() {
            0.0
        } else {
            self.probs[(k - self.support_min) as usize]
        }
    }

    /// `(k, q_k)` pairs in ascending `k`, zero-mass interior points skipped.
    pub fn iter(&self) -> impl Iterator<Item = (i64, f64)> + '_ {
        self.probs
            .iter()
            .enumerate()
            .filter(|(_, &q)| q > 0.0)
            .map(move |(i, &q)| (self.support_min + i as i64, q))
    }

    pub fn support_len(&self) -> usize {
        self.iter().count()
    }

    /// `E Z⁺`.
    pub fn mean_positive_part(&self) -> f64 {
        self.iter().map(|(k, q)| q * k.max(0) as f64).sum()
    }

    /// `P(Z < 0)`.
    pub fn ruin_mass(&self) -> f64 {
        self.mass_below(0)
    }

    /// `P(Z < t)`.
    pub fn mass_below(&self, t: i64) -> f64 {
        self.iter().take_while(|&(k, _)| k < t).map(|(_, q)| q).sum()
    }

    pub fn mean(&self) -> f64 {
        self.iter().map(|(k, q)| q * k as f64).sum()
    }

    pub fn to_map(&self) -> BTreeMap<i64, f64> {
        self.iter().collect()
    }
}

impl TryFrom<BTreeMap<i64, f64>> for IncomeDistribution {
    type Error = Error;
    fn try_from(raw: BTreeMap<i64, f64>) -> Result<Self> {
        validate_distribution(&raw)
    }
}

impl From<IncomeDistribution> for BTreeMap<i64, f64> {
    fn from(d: IncomeDistribution) -> Self {
        d.to_map()
    }
}

pub fn validate_distribution(raw: &BTreeMap<i64, f64>) -> Result<IncomeDistribution> {
    if raw.is_empty() {
        return Err(Error::EmptyDistribution);
    }
    for (&k, &q) in raw {
        if !q.is_finite() {
            return Err(Error::DomainError(format!("probability at {k} is not finite")));
        }
        if q < 0.0 {
            return Err(Error::NegativeMass { income: k, mass: q });
        }
    }
    let sum: f64 = raw.values().sum();
    if (sum - 1.0).abs() > NORMALIZATION_TOL {
        return Err(Error::NotNormalized { sum });
    }
    let lo = raw.iter().find(|(_, &q)| q > 0.0).map(|(&k, _)| k);
    let hi = raw.iter().rev().find(|(_, &q)| q > 0.0).map(|(&k, _)| k);
    let (lo, hi) = match (lo, hi) {
        (Some(lo), Some(hi)) => (lo, hi),
        _ => return Err(Error::NotNormalized { sum }),
    };
    if lo >= 0 {
        return Err(Error::NoRuinRisk);
    }
    let scale = if (sum - 1.0).abs() > RENORMALIZE_THRESHOLD { sum } else { 1.0 };
    let probs = (lo..=hi)
        .map(|k| raw.get(&k).copied().unwrap_or(0.0) / scale)
        .collect();
    Ok(IncomeDistribution { support_min: lo, probs })
}

/// One-period surplus transition; negative surplus is absorbing.
pub fn step(x: i64, a: i64, z: i64) -> Result<i64> {
    if !action_set(x).contains(&a) {
        return Err(Error::IllegalAction { surplus: x, action: a });
    }
    Ok(if x < 0 { x } else { x - a + z })
}

/// Admissible dividends at surplus `x`.
pub fn action_set(x: i64) -> RangeInclusive<i64> {
    0..=x.max(0)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SurplusState {
    pub x: i64,
}

impl SurplusState {
    pub fn ruined(&self) -> bool {
        self.x < 0
    }

    pub fn actions(&self) -> RangeInclusive<i64> {
        action_set(self.x)
    }

    pub fn step(&self, a: i64, z: i64) -> Result<SurplusState> {
        step(self.x, a, z).map(|x| SurplusState { x })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Utility {
    Exponential,
    Power,
    Logarithmic,
    RiskNeutral,
}

impl Utility {
    pub fn name(&self) -> &'static str {
        match self {
            Utility::Exponential => "exponential",
            Utility::Power => "power",
            Utility::Logarithmic => "logarithmic",
            Utility::RiskNeutral => "risk_neutral",
        }
    }

    pub fn check_gamma(&self, gamma: f64) -> Result<()> {
        let ok = match self {
            Utility::Exponential => gamma < 0.0 && gamma.is_finite(),
            Utility::Power => gamma > 0.0 && gamma < 1.0,
            Utility::Logarithmic | Utility::RiskNeutral => gamma.is_finite(),
        };
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidConfig(format!("gamma {gamma} not allowed for {} utility", self.name())))
        }
    }
}

impl fmt::Display for Utility {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Utility {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "exponential" => Ok(Utility::Exponential),
            "power" => Ok(Utility::Power),
            "logarithmic" | "log" => Ok(Utility::Logarithmic),
            "risk_neutral" | "neutral" => Ok(Utility::RiskNeutral),
            other => Err(Error::InvalidConfig(format!("unknown utility '{other}'"))),
        }
    }
}

pub fn utility(u: Utility, gamma: f64, w: f64) -> Result<f64> {
    match u {
        Utility::Logarithmic if w <= 0.0 => {
            Err(Error::DomainError(format!("log utility needs a positive argument, got {w}")))
        }
        _ if w < 0.0 => Err(Error::DomainError(format!("utility of negative wealth {w}"))),
        Utility::Exponential => Ok((gamma * w).exp() / gamma),
        Utility::Power => Ok(w.powf(gamma)),
        Utility::Logarithmic => Ok(w.ln()),
        Utility::RiskNeutral => Ok(w),
    }
}

/// Inverse of [`utility`].
pub fn certainty_equivalent(u: Utility, gamma: f64, expected_utility: f64) -> Result<f64> {
    let eu = expected_utility;
    let out_of_range = || Err(Error::DomainError(format!("{eu} is outside the range of {u} utility")));
    match u {
        Utility::Exponential => {
            let j = gamma * eu;
            if !(j > 0.0 && j <= 1.0 + 1e-12) {
                return out_of_range();
            }
            Ok((j.ln() / gamma).max(0.0))
        }
        Utility::Power => {
            if eu < 0.0 {
                return out_of_range();
            }
            Ok(eu.powf(1.0 / gamma))
        }
        Utility::Logarithmic => Ok(eu.exp()),
        Utility::RiskNeutral => {
            if eu < 0.0 {
                return out_of_range();
            }
            Ok(eu)
        }
    }
}

/// Arrow–Pratt absolute risk aversion `-U''/U'` at wealth `w`.
pub fn arrow_pratt(u: Utility, gamma: f64, w: f64) -> f64 {
    match u {
        Utility::Exponential => -gamma,
        Utility::Power => (1.0 - gamma) / w,
        Utility::Logarithmic => 1.0 / w,
        Utility::RiskNeutral => 0.0,
    }
}

pub const DEFAULT_TAIL_EPS: f64 = 1e-8;
pub const DEFAULT_GRID_POINTS: usize = 512;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProblemConfig {
    pub beta: f64,
    pub gamma: f64,
    pub utility: Utility,
    pub dist: IncomeDistribution,
    pub x_max: i64,
    /// Backward-induction depth; `None` picks the smallest depth meeting `tail_eps`.
    pub depth: Option<usize>,
    pub tail_eps: f64,
    pub s_grid_points: usize,
    pub seed: u64,
    /// Initial accumulated dividends (power and log utilities).
    pub y0: f64,
}

impl ProblemConfig {
    pub fn new(utility: Utility, beta: f64, gamma: f64, dist: IncomeDistribution, x_max: i64) -> Result<Self> {
        let cfg = ProblemConfig {
            beta,
            gamma,
            utility,
            dist,
            x_max,
            depth: None,
            tail_eps: DEFAULT_TAIL_EPS,
            s_grid_points: DEFAULT_GRID_POINTS,
            seed: 0,
            y0: if utility == Utility::Logarithmic { 1.0 } else { 0.0 },
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn with_depth(mut self, depth: usize) -> Self {
        self.depth = Some(depth);
        self
    }

    pub fn with_tail_eps(mut self, eps: f64) -> Self {
        self.tail_eps = eps;
        self
    }

    pub fn with_grid_points(mut self, m: usize) -> Self {
        self.s_grid_points = m;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_y0(mut self, y0: f64) -> Self {
        self.y0 = y0;
        self
    }

    pub fn with_gamma(mut self, gamma: f64) -> Self {
        self.gamma = gamma;
        self
    }

    pub fn with_x_max(mut self, x_max: i64) -> Self {
        self.x_max = x_max;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.beta > 0.0 && self.beta < 1.0) {
            return Err(Error::InvalidConfig(format!("beta {} must lie in (0, 1)", self.beta)));
        }
        self.utility.check_gamma(self.gamma)?;
        if self.x_max < 0 {
            return Err(Error::InvalidConfig(format!("x_max {} must be nonnegative", self.x_max)));
        }
        if self.depth == Some(0) {
            return Err(Error::InvalidConfig("depth must be positive".into()));
        }
        // Negated so NaN is rejected too.
        #[allow(clippy::neg_cmp_op_on_partial_ord)]
        if !(self.tail_eps > 0.0) {
            return Err(Error::InvalidConfig(format!("tail_eps {} must be positive", self.tail_eps)));
        }
        if self.s_grid_points < 2 {
            return Err(Error::InvalidConfig("s_grid_points must be at least 2".into()));
        }
        if !(self.y0 >= 0.0 && self.y0.is_finite()) {
            return Err(Error::InvalidConfig(format!("y0 {} must be finite and nonnegative", self.y0)));
        }
        Ok(())
    }

    /// Utility of total discounted dividends `w` (plus `y0` where it applies).
    pub fn utility_of(&self, w: f64) -> Result<f64> {
        let shift = match self.utility {
            Utility::Power | Utility::Logarithmic => self.y0,
            _ => 0.0,
        };
        utility(self.utility, self.gamma, w + shift)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn dist(pairs: &[(i64, f64)]) -> Result<IncomeDistribution> {
        validate_distribution(&pairs.iter().copied().collect())
    }

    #[test]
    fn symmetric_two_point_is_valid() {
        let d = dist(&[(-1, 0.5), (1, 0.5)]).unwrap();
        assert_eq!(d.support_min(), -1);
        assert_eq!(d.support_max(), 1);
        assert_eq!(d.prob(0), 0.0);
        assert_eq!(d.mean_positive_part(), 0.5);
        assert_eq!(d.ruin_mass(), 0.5);
    }

    #[test]
    fn rejects_bad_distributions() {
        assert_eq!(dist(&[(1, 1.0)]), Err(Error::NoRuinRisk));
        assert!(matches!(dist(&[(-1, 0.3), (1, 0.6)]), Err(Error::NotNormalized { .. })));
        assert!(matches!(dist(&[(-1, 1.2), (1, -0.2)]), Err(Error::NegativeMass { income: 1, .. })));
        assert_eq!(dist(&[]), Err(Error::EmptyDistribution));
    }

    #[test]
    fn zero_mass_endpoints_are_trimmed() {
        let d = dist(&[(-3, 0.0), (-1, 0.4), (2, 0.6), (5, 0.0)]).unwrap();
        assert_eq!((d.support_min(), d.support_max()), (-1, 2));
        assert_eq!(d.support_len(), 2);
        assert_eq!(d.iter().collect::<Vec<_>>(), vec![(-1, 0.4), (2, 0.6)]);
    }

    #[test]
    fn small_rounding_is_renormalized() {
        let d = dist(&[(-1, 0.4), (1, 0.6 + 5e-13)]).unwrap();
        let sum: f64 = d.iter().map(|(_, q)| q).sum();
        assert!((sum - 1.0).abs() < 1e-15);
    }

    #[test]
    fn two_point_preset() {
        let d = IncomeDistribution::two_point(0.6, 2).unwrap();
        assert_eq!(d.to_map(), BTreeMap::from([(-2, 0.4), (1, 0.6)]));
        assert!(IncomeDistribution::two_point(1.0, 2).is_err());
    }

    #[test]
    fn step_examples() {
        assert_eq!(step(5, 2, -1), Ok(2));
        assert_eq!(step(-3, 0, 7), Ok(-3));
        assert_eq!(step(0, 0, -1), Ok(-1));
        assert_eq!(step(2, 3, 0), Err(Error::IllegalAction { surplus: 2, action: 3 }));
        assert_eq!(step(-1, 1, 0), Err(Error::IllegalAction { surplus: -1, action: 1 }));
        assert_eq!(SurplusState { x: -2 }.actions(), 0..=0);
        assert!(SurplusState { x: -2 }.ruined());
    }

    #[test]
    fn utility_examples() {
        assert_eq!(utility(Utility::Exponential, -1.0, 0.0), Ok(-1.0));
        assert_eq!(utility(Utility::Power, 0.5, 4.0), Ok(2.0));
        assert_eq!(utility(Utility::RiskNeutral, 0.3, 3.7), Ok(3.7));
        assert!(matches!(utility(Utility::Logarithmic, 0.0, 0.0), Err(Error::DomainError(_))));
        assert_eq!(certainty_equivalent(Utility::Power, 0.5, 2.0), Ok(4.0));
        assert_eq!(certainty_equivalent(Utility::Exponential, -1.0, -1.0), Ok(0.0));
        let eu = utility(Utility::Exponential, -0.5, 3.0).unwrap();
        let ce = certainty_equivalent(Utility::Exponential, -0.5, eu).unwrap();
        assert!((ce - 3.0).abs() < 1e-12);
        assert!(certainty_equivalent(Utility::Exponential, -1.0, 0.5).is_err());
    }

    #[test]
    fn arrow_pratt_closed_forms() {
        assert_eq!(arrow_pratt(Utility::Exponential, -2.0, 7.0), 2.0);
        assert_eq!(arrow_pratt(Utility::Power, 0.5, 2.0), 0.25);
        assert_eq!(arrow_pratt(Utility::Logarithmic, 0.0, 4.0), 0.25);
    }

    #[test]
    fn config_validation() {
        let d = IncomeDistribution::two_point(0.6, 1).unwrap();
        assert!(ProblemConfig::new(Utility::Exponential, 0.9, -0.5, d.clone(), 10).is_ok());
        assert!(ProblemConfig::new(Utility::Exponential, 0.9, 0.5, d.clone(), 10).is_err());
        assert!(ProblemConfig::new(Utility::Power, 1.0, 0.5, d.clone(), 10).is_err());
        assert!(ProblemConfig::new(Utility::Power, 0.9, 1.5, d.clone(), 10).is_err());
        assert!(ProblemConfig::new(Utility::Power, 0.9, 0.5, d, -1).is_err());
        assert_eq!("risk_neutral".parse::<Utility>(), Ok(Utility::RiskNeutral));
    }

    fn utilities() -> impl Strategy<Value = (Utility, f64)> {
        prop_oneof![
            (-3.0..-0.01f64).prop_map(|g| (Utility::Exponential, g)),
            (0.01..0.99f64).prop_map(|g| (Utility::Power, g)),
            Just((Utility::Logarithmic, 0.0)),
            Just((Utility::RiskNeutral, 0.0)),
        ]
    }

    proptest! {
        #[test]
        fn absorbing_states_never_move(x in -100i64..0, z in -50i64..50) {
            prop_assert_eq!(step(x, 0, z), Ok(x));
        }

        #[test]
        fn utility_strictly_increasing((u, g) in utilities(), a in 0.01..20.0f64, b in 0.01..20.0f64) {
            prop_assume!((a - b).abs() > 1e-6);
            let (lo, hi) = if a < b { (a, b) } else { (b, a) };
            prop_assert!(utility(u, g, lo).unwrap() < utility(u, g, hi).unwrap());
        }

        #[test]
        fn certainty_equivalent_inverts_utility((u, g) in utilities(), w in 0.01..20.0f64) {
            let ce = certainty_equivalent(u, g, utility(u, g, w).unwrap()).unwrap();
            prop_assert!((ce - w).abs() <= 1e-12 * w.max(1.0), "{} vs {}", ce, w);
        }

        #[test]
        fn validation_is_idempotent(ws in proptest::collection::vec(0.0..1.0f64, 2..6), neg in 1i64..4) {
            let total: f64 = ws.iter().sum::<f64>() + 1.0;
            let mut raw: BTreeMap<i64, f64> = ws.iter().enumerate().map(|(i, w)| (i as i64, w / total)).collect();
            raw.insert(-neg, 1.0 / total);
            let sum: f64 = raw.values().sum();
            prop_assume!((sum - 1.0).abs() <= NORMALIZATION_TOL);
            let d = validate_distribution(&raw).unwrap();
            prop_assert_eq!(validate_distribution(&d.to_map()).unwrap(), d);
        }
    }
}
