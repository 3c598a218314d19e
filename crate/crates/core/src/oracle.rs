//! Exhaustive history-tree optimisation for tiny instances.
//!
//! Probabilities and accumulated dividends are exact rationals; utilities are
//! evaluated in 128-bit binary floating point. Nodes are identified by
//! `(depth, surplus, accumulated dividends)`: two histories reaching the same
//! triple face the same future, so their subtrees are shared. The unmerged
//! variants walk every history separately.

use std::collections::{BTreeSet, HashMap};

use dashu_float::{round::mode::HalfEven, FBig};
use dashu_int::{IBig, UBig};
use num_bigint::{BigInt, Sign};
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde_json::{json, Value};

use crate::error::{Error, Result};
use crate::exp::schedule::{ln_h_lower, ln_h_upper};
use crate::exp::ExpPolicy;
use crate::model::{ProblemConfig, Utility};
use crate::power::PowerPolicy;

type F = FBig<HalfEven, 2>;

pub const PRECISION_BITS: usize = 128;
pub const NODE_LIMIT: usize = 10_000_000;
const TIE_REL: f64 = 1e-25;

/// How paths still alive at the horizon are valued.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Terminal {
    /// Stop paying: only dividends up to the horizon count.
    Stop,
    /// Lower tail closure (pay the whole surplus at the horizon, then nothing more).
    TailLower,
    /// Upper tail closure (best case for the remaining income).
    TailUpper,
}

fn float(v: f64) -> F {
    F::try_from(v).expect("finite value").with_precision(PRECISION_BITS).value()
}

fn to_ibig(n: &BigInt) -> IBig {
    let (sign, words) = n.to_u64_digits();
    let mag = IBig::from(UBig::from_words(&words));
    if sign == Sign::Minus {
        -mag
    } else {
        mag
    }
}

fn from_rational(r: &BigRational) -> F {
    let n = F::from(to_ibig(r.numer())).with_precision(PRECISION_BITS).value();
    let d = F::from(to_ibig(r.denom())).with_precision(PRECISION_BITS).value();
    n / d
}

fn to_f64(v: &F) -> f64 {
    v.to_f64().value()
}

/// Best rational approximation with denominator at most 10^6 when it matches
/// `v` to 1e-15, otherwise the exact binary value.
pub fn rational_from_f64(v: f64) -> BigRational {
    let (mut h0, mut h1) = (BigInt::zero(), BigInt::one());
    let (mut k0, mut k1) = (BigInt::one(), BigInt::zero());
    let mut x = v;
    for _ in 0..40 {
        let a = x.floor();
        let ai = BigInt::from(a as i64);
        let h2 = &ai * &h1 + &h0;
        let k2 = &ai * &k1 + &k0;
        if k2 > BigInt::from(1_000_000) {
            break;
        }
        (h0, h1, k0, k1) = (h1, h2, k1, k2);
        let approx = h1.to_f64().unwrap() / k1.to_f64().unwrap();
        if (approx - v).abs() <= 1e-15 * v.abs().max(1.0) {
            return BigRational::new(h1, k1);
        }
        let frac = x - a;
        if frac == 0.0 {
            break;
        }
        x = 1.0 / frac;
    }
    BigRational::from_float(v).expect("finite value")
}

/// A tiny instance with exact data.
#[derive(Debug, Clone)]
pub struct OracleProblem {
    pub utility: Utility,
    pub gamma: f64,
    pub horizon: usize,
    pub terminal: Terminal,
    pub probs: Vec<(i64, BigRational)>,
    pub y0: BigRational,
    beta_pows: Vec<BigRational>,
    income_bound: BigRational,
    /// Multiplicative tail factor for the exponential criterion.
    exp_tail: f64,
}

impl OracleProblem {
    pub fn from_config(cfg: &ProblemConfig, horizon: usize, terminal: Terminal) -> Result<Self> {
        cfg.validate()?;
        let probs: Vec<(i64, BigRational)> = cfg.dist.iter().map(|(k, q)| (k, rational_from_f64(q))).collect();
        let total: BigRational = probs.iter().map(|(_, q)| q.clone()).sum();
        let probs = probs.into_iter().map(|(k, q)| (k, q / &total)).collect();
        let beta = rational_from_f64(cfg.beta);
        let beta_pows: Vec<BigRational> =
            std::iter::successors(Some(BigRational::one()), |b| Some(b * &beta)).take(horizon + 1).collect();
        let ez = rational_from_f64(cfg.dist.mean_positive_part());
        let income_bound = &beta * ez / (BigRational::one() - &beta);
        let y0 = match cfg.utility {
            Utility::Power | Utility::Logarithmic => rational_from_f64(cfg.y0),
            _ => BigRational::zero(),
        };
        if cfg.utility == Utility::Logarithmic && !y0.is_positive() {
            return Err(Error::DomainError("log utility needs y0 > 0".into()));
        }
        let theta_h = cfg.gamma * cfg.beta.powi(horizon as i32);
        let exp_tail = match (cfg.utility, terminal) {
            (Utility::Exponential, Terminal::TailLower) => ln_h_lower(&cfg.dist, cfg.beta, theta_h).lo.exp(),
            (Utility::Exponential, Terminal::TailUpper) => ln_h_upper(&cfg.dist, cfg.beta, theta_h).hi.exp(),
            _ => 1.0,
        };
        Ok(OracleProblem {
            utility: cfg.utility,
            gamma: cfg.gamma,
            horizon,
            terminal,
            probs,
            y0,
            beta_pows,
            income_bound,
            exp_tail,
        })
    }

    fn minimises(&self) -> bool {
        self.utility == Utility::Exponential
    }

    /// Exact sum of the income probabilities.
    pub fn total_probability(&self) -> BigRational {
        self.probs.iter().map(|(_, q)| q.clone()).sum()
    }
}

/// Sole input a history-dependent rule sees.
#[derive(Debug, Clone)]
pub struct History<'a> {
    pub depth: usize,
    pub x: i64,
    /// Accumulated discounted dividends, excluding `y0`.
    pub s: &'a BigRational,
    /// `(surplus, dividend)` pairs so far.
    pub path: &'a [(i64, i64)],
}

pub trait HistoryPolicy {
    fn action(&self, h: &History<'_>) -> Option<i64>;

    /// True when the action depends only on `(depth, x, s)`, which allows sharing subtrees.
    fn state_only(&self) -> bool {
        false
    }
}

impl HistoryPolicy for ExpPolicy {
    fn action(&self, h: &History<'_>) -> Option<i64> {
        (h.depth < self.depth()).then(|| ExpPolicy::action(self, h.depth, h.x))
    }
    fn state_only(&self) -> bool {
        true
    }
}

/// Power policy read at `s + y0` (nearest lower grid point).
pub struct PowerRule<'a> {
    pub policy: &'a PowerPolicy,
    pub y0: f64,
}

impl HistoryPolicy for PowerRule<'_> {
    fn action(&self, h: &History<'_>) -> Option<i64> {
        let s = h.s.to_f64()? + self.y0;
        Some(self.policy.action(h.depth, h.x, s))
    }
    fn state_only(&self) -> bool {
        true
    }
}

/// Pay everything every period.
pub struct PayAll;

impl HistoryPolicy for PayAll {
    fn action(&self, h: &History<'_>) -> Option<i64> {
        Some(h.x.max(0))
    }
    fn state_only(&self) -> bool {
        true
    }
}

/// Never pay.
pub struct PayNothing;

impl HistoryPolicy for PayNothing {
    fn action(&self, _: &History<'_>) -> Option<i64> {
        Some(0)
    }
    fn state_only(&self) -> bool {
        true
    }
}

/// A rule depending on `(depth, x)` only.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct MarkovRule {
    pub actions: HashMap<(usize, i64), i64>,
}

impl HistoryPolicy for MarkovRule {
    fn action(&self, h: &History<'_>) -> Option<i64> {
        self.actions.get(&(h.depth, h.x)).copied()
    }
    fn state_only(&self) -> bool {
        true
    }
}

type Key = (usize, i64, BigRational);

/// Optimal value and the optimal action at every reachable node.
#[derive(Debug, Clone)]
pub struct OracleSolution {
    pub x0: i64,
    pub value: f64,
    pub value_text: String,
    pub nodes: usize,
    actions: HashMap<Key, i64>,
}

impl HistoryPolicy for OracleSolution {
    fn action(&self, h: &History<'_>) -> Option<i64> {
        self.actions.get(&(h.depth, h.x, h.s.clone())).copied()
    }
    fn state_only(&self) -> bool {
        true
    }
}

impl OracleSolution {
    pub fn action_at(&self, depth: usize, x: i64, s: &BigRational) -> Option<i64> {
        self.actions.get(&(depth, x, s.clone())).copied()
    }
}

enum Mode<'p> {
    Optimise,
    Follow(&'p dyn HistoryPolicy),
}

struct Engine<'a, 'p> {
    p: &'a OracleProblem,
    mode: Mode<'p>,
    merge: bool,
    memo: HashMap<Key, F>,
    actions: HashMap<Key, i64>,
    leaf_cache: HashMap<BigRational, F>,
    step_factor: HashMap<(usize, i64), F>,
    probs: Vec<(i64, F)>,
    path: Vec<(i64, i64)>,
    nodes: usize,
}

impl<'a, 'p> Engine<'a, 'p> {
    fn new(p: &'a OracleProblem, mode: Mode<'p>, merge: bool) -> Self {
        let probs = p.probs.iter().map(|(k, q)| (*k, from_rational(q))).collect();
        Engine {
            p,
            mode,
            merge,
            memo: HashMap::new(),
            actions: HashMap::new(),
            leaf_cache: HashMap::new(),
            step_factor: HashMap::new(),
            probs,
            path: Vec::new(),
            nodes: 0,
        }
    }

    /// `e^{gamma beta^d a}` for the exponential criterion.
    fn factor(&mut self, d: usize, a: i64) -> F {
        if let Some(f) = self.step_factor.get(&(d, a)) {
            return f.clone();
        }
        let arg = from_rational(&(&self.p.beta_pows[d] * BigRational::from_integer(a.into()))) * float(self.p.gamma);
        let f = arg.exp();
        self.step_factor.insert((d, a), f.clone());
        f
    }

    /// Utility of total wealth `w` (for the non-exponential criteria).
    fn wealth_utility(&mut self, w: BigRational) -> F {
        if let Some(v) = self.leaf_cache.get(&w) {
            return v.clone();
        }
        let wf = from_rational(&w);
        let v = match self.p.utility {
            Utility::Power => {
                if w.is_zero() {
                    F::ZERO.with_precision(PRECISION_BITS).value()
                } else {
                    (wf.ln() * float(self.p.gamma)).exp()
                }
            }
            Utility::Logarithmic => wf.ln(),
            _ => wf,
        };
        self.leaf_cache.insert(w, v.clone());
        v
    }

    fn leaf(&mut self, d: usize, x: i64, s: &BigRational, efac: &F) -> F {
        let alive = x >= 0;
        if self.p.utility == Utility::Exponential {
            if !alive || self.p.terminal == Terminal::Stop {
                return efac.clone();
            }
            let tail = self.factor(d, x) * float(self.p.exp_tail);
            return efac.clone() * tail;
        }
        let mut w = &self.p.y0 + s;
        if alive {
            let bd = &self.p.beta_pows[d];
            match self.p.terminal {
                Terminal::Stop => {}
                Terminal::TailLower => w += bd * BigRational::from_integer(x.into()),
                Terminal::TailUpper => w += bd * (BigRational::from_integer(x.into()) + &self.p.income_bound),
            }
        }
        self.wealth_utility(w)
    }

    fn better(&self, v: &F, best: &F) -> bool {
        let tol = float(TIE_REL) * (if best < &F::ZERO { -best.clone() } else { best.clone() });
        if self.p.minimises() {
            v.clone() <= best.clone() + tol
        } else {
            v.clone() >= best.clone() - tol
        }
    }

    fn node(&mut self, d: usize, x: i64, s: &BigRational, efac: &F) -> Result<F> {
        self.nodes += 1;
        if self.nodes > NODE_LIMIT {
            return Err(Error::TooLarge { limit: NODE_LIMIT });
        }
        if x < 0 || d == self.p.horizon {
            return Ok(self.leaf(d, x, s, efac));
        }
        let key = (d, x, s.clone());
        if self.merge {
            if let Some(v) = self.memo.get(&key) {
                return Ok(v.clone());
            }
        }
        let actions: Vec<i64> = match self.mode {
            Mode::Optimise => (0..=x).collect(),
            Mode::Follow(pol) => {
                let h = History { depth: d, x, s, path: &self.path };
                match pol.action(&h) {
                    Some(a) if (0..=x).contains(&a) => vec![a],
                    _ => return Err(Error::UndefinedAction { depth: d, surplus: x }),
                }
            }
        };
        let mut best: Option<(F, i64)> = None;
        for a in actions {
            let s_next = s + &self.p.beta_pows[d] * BigRational::from_integer(a.into());
            let e_next = if self.p.utility == Utility::Exponential {
                efac.clone() * self.factor(d, a)
            } else {
                efac.clone()
            };
            self.path.push((x, a));
            let mut total = F::ZERO.with_precision(PRECISION_BITS).value();
            for i in 0..self.probs.len() {
                let (k, q) = self.probs[i].clone();
                let child = self.node(d + 1, x - a + k, &s_next, &e_next);
                let child = match child {
                    Ok(c) => c,
                    Err(e) => {
                        self.path.pop();
                        return Err(e);
                    }
                };
                total += q * child;
            }
            self.path.pop();
            best = match best {
                Some((b, ba)) if !self.better(&total, &b) => Some((b, ba)),
                Some((b, ba)) if !self.better(&b, &total) || a > ba => {
                    // `total` is strictly better, or tied with a larger action.
                    let keep_best = if self.p.minimises() { total.clone().min(b) } else { total.clone().max(b) };
                    Some((keep_best, a))
                }
                Some(other) => Some(other),
                None => Some((total, a)),
            };
        }
        let (v, a) = best.expect("nonempty action set");
        if self.merge {
            self.memo.insert(key.clone(), v.clone());
        }
        if matches!(self.mode, Mode::Optimise) {
            self.actions.insert(key, a);
        }
        Ok(v)
    }

    fn root(&mut self, x0: i64) -> Result<F> {
        let one = F::ONE.with_precision(PRECISION_BITS).value();
        self.node(0, x0, &BigRational::zero(), &one)
    }
}

/// Optimal value over all history-dependent rules.
pub fn exact_optimal(p: &OracleProblem, x0: i64) -> Result<OracleSolution> {
    solve_tree(p, x0, true)
}

/// As [`exact_optimal`] but without sharing any subtrees.
pub fn exact_optimal_unmerged(p: &OracleProblem, x0: i64) -> Result<OracleSolution> {
    solve_tree(p, x0, false)
}

fn solve_tree(p: &OracleProblem, x0: i64, merge: bool) -> Result<OracleSolution> {
    let mut e = Engine::new(p, Mode::Optimise, merge);
    let v = e.root(x0)?;
    Ok(OracleSolution { x0, value: to_f64(&v), value_text: v.to_string(), nodes: e.nodes, actions: e.actions })
}

/// Exact value of following `policy` from `x0`.
pub fn exact_policy_value(p: &OracleProblem, policy: &dyn HistoryPolicy, x0: i64) -> Result<f64> {
    let mut e = Engine::new(p, Mode::Follow(policy), policy.state_only());
    e.root(x0).map(|v| to_f64(&v))
}

/// Exact total probability of all leaves reached under `policy`.
pub fn path_probability_total(p: &OracleProblem, policy: &dyn HistoryPolicy, x0: i64) -> Result<BigRational> {
    fn walk(
        p: &OracleProblem,
        pol: &dyn HistoryPolicy,
        d: usize,
        x: i64,
        s: &BigRational,
        path: &mut Vec<(i64, i64)>,
        nodes: &mut usize,
    ) -> Result<BigRational> {
        *nodes += 1;
        if *nodes > NODE_LIMIT {
            return Err(Error::TooLarge { limit: NODE_LIMIT });
        }
        if x < 0 || d == p.horizon {
            return Ok(BigRational::one());
        }
        let a = match pol.action(&History { depth: d, x, s, path }) {
            Some(a) if (0..=x).contains(&a) => a,
            _ => return Err(Error::UndefinedAction { depth: d, surplus: x }),
        };
        let s_next = s + &p.beta_pows[d] * BigRational::from_integer(a.into());
        path.push((x, a));
        let mut total = BigRational::zero();
        for (k, q) in &p.probs {
            total += q * walk(p, pol, d + 1, x - a + k, &s_next, path, nodes)?;
        }
        path.pop();
        Ok(total)
    }
    walk(p, policy, 0, x0, &BigRational::zero(), &mut Vec::new(), &mut 0)
}

/// Surpluses reachable at each depth under some rule.
fn reachable(p: &OracleProblem, x0: i64) -> Vec<BTreeSet<i64>> {
    let mut out = vec![BTreeSet::from([x0])];
    for _ in 1..p.horizon {
        let prev = out.last().unwrap();
        let next = prev
            .iter()
            .filter(|&&x| x >= 0)
            .flat_map(|&x| (0..=x).flat_map(move |a| p.probs.iter().map(move |(k, _)| x - a + k)))
            .filter(|&x| x >= 0)
            .collect();
        out.push(next);
    }
    out
}

/// Best rule among all depth-indexed Markov rules, by enumeration.
pub fn best_markov_rule(p: &OracleProblem, x0: i64, limit: usize) -> Result<(f64, MarkovRule)> {
    let states: Vec<(usize, i64)> = reachable(p, x0)
        .iter()
        .enumerate()
        .flat_map(|(d, xs)| xs.iter().filter(|&&x| x >= 0).map(move |&x| (d, x)))
        .collect();
    let count = states.iter().try_fold(1usize, |acc, &(_, x)| acc.checked_mul(x as usize + 1));
    match count {
        Some(c) if c <= limit => {}
        _ => return Err(Error::TooLarge { limit }),
    }
    let mut choice = vec![0i64; states.len()];
    let mut best: Option<(f64, MarkovRule)> = None;
    loop {
        let rule = MarkovRule { actions: states.iter().copied().zip(choice.iter().copied()).collect() };
        let v = exact_policy_value(p, &rule, x0)?;
        let improves = match &best {
            None => true,
            Some((b, _)) => {
                if p.minimises() {
                    v < *b
                } else {
                    v > *b
                }
            }
        };
        if improves {
            best = Some((v, rule));
        }
        // Odometer over all action combinations.
        let mut i = 0;
        loop {
            if i == states.len() {
                return Ok(best.expect("at least one rule"));
            }
            if choice[i] < states[i].1 {
                choice[i] += 1;
                break;
            }
            choice[i] = 0;
            i += 1;
        }
    }
}

/// JSON view of the optimal tree from `x0`, truncated at `max_depth`.
pub fn tree_json(p: &OracleProblem, sol: &OracleSolution, max_depth: usize) -> Value {
    fn go(p: &OracleProblem, sol: &OracleSolution, d: usize, x: i64, s: &BigRational, max_depth: usize) -> Value {
        if x < 0 || d == p.horizon || d > max_depth {
            return json!({ "depth": d, "x": x, "s": s.to_string(), "leaf": true });
        }
        let a = sol.action_at(d, x, s);
        let children: Vec<Value> = match a {
            Some(a) => {
                let s_next = s + &p.beta_pows[d] * BigRational::from_integer(a.into());
                p.probs
                    .iter()
                    .map(|(k, q)| {
                        json!({
                            "income": k,
                            "prob": q.to_string(),
                            "node": go(p, sol, d + 1, x - a + k, &s_next, max_depth),
                        })
                    })
                    .collect()
            }
            None => vec![],
        };
        json!({ "depth": d, "x": x, "s": s.to_string(), "action": a, "children": children })
    }
    json!({
        "x0": sol.x0,
        "value": sol.value,
        "value_text": sol.value_text,
        "horizon": p.horizon,
        "tree": go(p, sol, 0, sol.x0, &BigRational::zero(), max_depth),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::IncomeDistribution;
    use std::collections::BTreeMap;

    fn exp_cfg(d: IncomeDistribution, gamma: f64, x_max: i64) -> ProblemConfig {
        ProblemConfig::new(Utility::Exponential, 0.5, gamma, d, x_max).unwrap()
    }

    fn sym() -> IncomeDistribution {
        IncomeDistribution::new(&BTreeMap::from([(-1, 0.5), (1, 0.5)])).unwrap()
    }

    #[test]
    fn rational_conversion() {
        assert_eq!(rational_from_f64(0.8), BigRational::new(4.into(), 5.into()));
        assert_eq!(rational_from_f64(0.35), BigRational::new(7.into(), 20.into()));
        assert_eq!(rational_from_f64(-2.0), BigRational::from_integer((-2).into()));
        let third = rational_from_f64(1.0 / 3.0);
        assert_eq!(third, BigRational::new(1.into(), 3.into()));
    }

    #[test]
    fn downward_income_exponential() {
        let cfg = exp_cfg(IncomeDistribution::degenerate(-1).unwrap(), -1.0, 3);
        let p = OracleProblem::from_config(&cfg, 3, Terminal::Stop).unwrap();
        let sol = exact_optimal(&p, 2).unwrap();
        assert!((sol.value - (-2.0f64).exp()).abs() < 1e-16);
        assert_eq!(exact_policy_value(&p, &PayAll, 2).unwrap(), sol.value);
        assert_eq!(exact_policy_value(&p, &PayNothing, 2).unwrap(), 1.0);
        assert_eq!(exact_optimal(&p, -1).unwrap().value, 1.0);
    }

    #[test]
    fn ruined_start_power_is_zero() {
        let cfg = ProblemConfig::new(Utility::Power, 0.5, 0.5, sym(), 3).unwrap();
        let p = OracleProblem::from_config(&cfg, 3, Terminal::Stop).unwrap();
        assert_eq!(exact_optimal(&p, -1).unwrap().value, 0.0);
    }

    #[test]
    fn pay_all_single_path() {
        let cfg = ProblemConfig::new(Utility::Power, 0.9, 0.5, IncomeDistribution::degenerate(-2).unwrap(), 5).unwrap();
        let p = OracleProblem::from_config(&cfg, 4, Terminal::Stop).unwrap();
        assert!((exact_policy_value(&p, &PayAll, 4).unwrap() - 2.0).abs() < 1e-16);
    }

    #[test]
    fn symmetric_power_reference() {
        // Frozen from an independent 50-digit enumeration of the same tree.
        let cfg = ProblemConfig::new(Utility::Power, 0.5, 0.5, sym(), 3).unwrap();
        let p = OracleProblem::from_config(&cfg, 3, Terminal::Stop).unwrap();
        let sol = exact_optimal(&p, 1).unwrap();
        assert!((sol.value - SYM_POWER_H3_X1).abs() < 1e-15, "{}", sol.value_text);
    }

    const SYM_POWER_H3_X1: f64 = 1.136_905_131_730_971;

    #[test]
    fn path_probabilities_sum_to_one() {
        let d = IncomeDistribution::new(&BTreeMap::from([(-2, 0.35), (1, 0.4), (3, 0.25)])).unwrap();
        let cfg = exp_cfg(d, -0.5, 4);
        let p = OracleProblem::from_config(&cfg, 3, Terminal::Stop).unwrap();
        assert!(p.total_probability().is_one());
        let sol = exact_optimal(&p, 2).unwrap();
        assert!(path_probability_total(&p, &sol, 2).unwrap().is_one());
        assert!(path_probability_total(&p, &PayNothing, 2).unwrap().is_one());
    }

    #[test]
    fn merged_and_unmerged_agree() {
        let d = IncomeDistribution::new(&BTreeMap::from([(-1, 0.4), (1, 0.6)])).unwrap();
        for u in [Utility::Exponential, Utility::Power] {
            let g = if u == Utility::Power { 0.5 } else { -0.5 };
            let cfg = ProblemConfig::new(u, 0.8, g, d.clone(), 3).unwrap();
            let p = OracleProblem::from_config(&cfg, 3, Terminal::TailLower).unwrap();
            let a = exact_optimal(&p, 2).unwrap();
            let b = exact_optimal_unmerged(&p, 2).unwrap();
            assert_eq!(a.value_text, b.value_text);
            assert!(a.nodes < b.nodes);
        }
    }

    #[test]
    fn optimal_tree_reevaluates_to_same_value() {
        let cfg = exp_cfg(sym(), -2.0, 3);
        let p = OracleProblem::from_config(&cfg, 4, Terminal::TailUpper).unwrap();
        let sol = exact_optimal(&p, 3).unwrap();
        assert_eq!(exact_policy_value(&p, &sol, 3).unwrap(), sol.value);
    }

    #[test]
    fn undefined_actions_are_reported() {
        let cfg = exp_cfg(sym(), -1.0, 3);
        let p = OracleProblem::from_config(&cfg, 2, Terminal::Stop).unwrap();
        let empty = MarkovRule::default();
        assert!(matches!(exact_policy_value(&p, &empty, 1), Err(Error::UndefinedAction { depth: 0, surplus: 1 })));
    }

    #[test]
    fn exponential_history_optimum_is_markov() {
        let d = IncomeDistribution::new(&BTreeMap::from([(-1, 0.4), (1, 0.6)])).unwrap();
        let cfg = ProblemConfig::new(Utility::Exponential, 0.8, -1.0, d, 3).unwrap();
        let p = OracleProblem::from_config(&cfg, 3, Terminal::TailLower).unwrap();
        let tree = exact_optimal(&p, 2).unwrap();
        let (markov, _) = best_markov_rule(&p, 2, 1_000_000).unwrap();
        assert!((tree.value - markov).abs() <= 1e-15 * tree.value.abs());
    }

    #[test]
    fn tree_dump_is_json() {
        let cfg = exp_cfg(sym(), -1.0, 3);
        let p = OracleProblem::from_config(&cfg, 2, Terminal::Stop).unwrap();
        let sol = exact_optimal(&p, 1).unwrap();
        let v = tree_json(&p, &sol, 1);
        assert_eq!(v["tree"]["depth"], 0);
        assert_eq!(v["tree"]["children"].as_array().unwrap().len(), 2);
    }
}
