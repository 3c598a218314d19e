use std::fmt;
use std::io;

use dividend_core::exp::solve_exp_model;
use dividend_core::howard::DecisionRule;
use dividend_core::neutral::neutral_barrier_bound;
use dividend_core::oracle::{exact_optimal, OracleProblem, Terminal};
use dividend_core::power::checks::PowerCheckReport;
use dividend_core::{
    assess_ruin, barrier_diagnostics, check_exp_invariants, check_power_invariants, howard_solve, simulate_paths,
    solve_exp, solve_log, solve_neutral, solve_power, xi_star_bound, BandFunction, DividendRule, Error, ExpModel,
    ExpPolicy, ExpSolution, NeutralSolution, PowerSolution, ProblemConfig, RuinCheck, SimulationSummary, Utility,
    Violation,
};
use serde::Serialize;

use crate::config::{ConfigError, FileConfig};
use crate::output::{OutputDir, BANDS, POLICY, SUMMARY, VALUES};
use crate::{Command, Common, EXIT_INVALID, EXIT_INVARIANT, EXIT_IO};

#[derive(Debug)]
pub enum Failure {
    Io(String),
    Invalid(String),
    Invariant(String),
}

impl Failure {
    pub fn exit_code(&self) -> i32 {
        match self {
            Failure::Io(_) => EXIT_IO,
            Failure::Invalid(_) => EXIT_INVALID,
            Failure::Invariant(_) => EXIT_INVARIANT,
        }
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Failure::Io(m) => write!(f, "I/O error: {m}"),
            Failure::Invalid(m) => write!(f, "{m}"),
            Failure::Invariant(m) => write!(f, "invariant violated: {m}"),
        }
    }
}

impl From<io::Error> for Failure {
    fn from(e: io::Error) -> Self {
        Failure::Io(e.to_string())
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        if e.is_invariant() {
            Failure::Invariant(e.to_string())
        } else {
            Failure::Invalid(e.to_string())
        }
    }
}

impl From<ConfigError> for Failure {
    fn from(e: ConfigError) -> Self {
        match e {
            ConfigError::Io(e) => Failure::Io(e.to_string()),
            other => Failure::Invalid(other.to_string()),
        }
    }
}

type Outcome = Result<(), Failure>;

pub fn dispatch(cmd: &Command) -> Outcome {
    match cmd {
        Command::SolveExp(c) => solve_exp_cmd(c),
        Command::SolvePower(c) => solve_power_cmd(c, Utility::Power),
        Command::SolveLog(c) => solve_power_cmd(c, Utility::Logarithmic),
        Command::SolveNeutral(c) => solve_neutral_cmd(c),
        Command::Howard { common, max_iterations } => howard_cmd(common, *max_iterations),
        Command::OracleCheck { common, x0 } => oracle_cmd(common, *x0),
        Command::Simulate { common, x0, paths, max_steps } => simulate_cmd(common, *x0, *paths, *max_steps),
        Command::Bands(c) => bands_cmd(c),
    }
}

fn load(c: &Common) -> Result<(ProblemConfig, OutputDir), Failure> {
    let file = FileConfig::load(&c.config)?;
    let cfg = file.problem()?;
    let dir = c.output_dir.clone().unwrap_or_else(|| file.output_dir());
    Ok((cfg, OutputDir::create(&dir)?))
}

fn expect_utility(cfg: &ProblemConfig, allowed: &[Utility], command: &str) -> Outcome {
    if allowed.contains(&cfg.utility) {
        Ok(())
    } else {
        Err(Failure::Invalid(format!("{command} does not handle {} utility", cfg.utility)))
    }
}

fn violations_failure(what: &str, v: &[Violation]) -> Outcome {
    match v.first() {
        None => Ok(()),
        Some(first) => Err(Failure::Invariant(format!(
            "{} {what} violation(s), first: {} at depth {}, x = {}: {}",
            v.len(),
            first.rule,
            first.depth,
            first.x,
            first.detail
        ))),
    }
}

// ---------------------------------------------------------------- exponential

#[derive(Serialize)]
struct ExpValueRow {
    n: usize,
    theta: f64,
    x: i64,
    j_lo: f64,
    j_hi: f64,
    action: i64,
    xi: i64,
    band_cuts: String,
}

#[derive(Serialize)]
struct PolicyRow {
    n: usize,
    x: i64,
    action: i64,
}

#[derive(Serialize)]
struct BandRow {
    n: usize,
    theta: f64,
    xi: i64,
    bands: usize,
    band_cuts: String,
}

#[derive(Serialize)]
struct ExpRoot {
    x: i64,
    j_lo: f64,
    j_hi: f64,
    expected_utility_lo: f64,
    expected_utility_hi: f64,
    certainty_equivalent_lo: f64,
    certainty_equivalent_hi: f64,
}

#[derive(Serialize)]
struct ExpSummary {
    utility: &'static str,
    beta: f64,
    gamma: f64,
    depth: usize,
    x_max: i64,
    tail_eps: f64,
    s_star: f64,
    root_width: f64,
    max_barrier: i64,
    violations: Vec<Violation>,
    depth0: Vec<ExpRoot>,
}

/// Band functions per depth; a column that is not a band yields a violation.
fn exp_bands(policy: &ExpPolicy) -> (Vec<Option<BandFunction>>, Vec<Violation>) {
    let mut bad = Vec::new();
    let bands = policy
        .actions
        .iter()
        .enumerate()
        .map(|(n, col)| match BandFunction::from_column(col) {
            Ok(b) => Some(b),
            Err(e) => {
                bad.push(Violation { rule: "band_function", depth: n, x: 0, detail: e.to_string() });
                None
            }
        })
        .collect();
    (bands, bad)
}

fn cuts(b: &Option<BandFunction>) -> String {
    b.as_ref().map(BandFunction::cuts_string).unwrap_or_default()
}

fn write_exp_policy(out: &OutputDir, thetas: &[f64], policy: &ExpPolicy, bands: &[Option<BandFunction>]) -> io::Result<()> {
    let x_max = policy.x_max();
    out.csv(
        POLICY,
        (0..policy.depth()).flat_map(|n| (0..=x_max).map(move |x| PolicyRow { n, x, action: policy.action(n, x) })),
    )?;
    out.csv(
        BANDS,
        bands.iter().enumerate().map(|(n, b)| BandRow {
            n,
            theta: thetas[n],
            xi: policy.xi[n],
            bands: b.as_ref().map_or(0, BandFunction::bands),
            band_cuts: cuts(b),
        }),
    )
}

fn write_exp(out: &OutputDir, sol: &ExpSolution, violations: Vec<Violation>, bands: &[Option<BandFunction>]) -> Outcome {
    let m = &sol.model;
    let thetas = &sol.table.thetas;
    out.csv(
        VALUES,
        (0..m.depth()).flat_map(|n| {
            (0..=m.x_max).map(move |x| {
                let v = sol.table.get(n, x);
                ExpValueRow {
                    n,
                    theta: thetas[n],
                    x,
                    j_lo: v.lo,
                    j_hi: v.hi,
                    action: sol.policy.action(n, x),
                    xi: sol.policy.xi[n],
                    band_cuts: cuts(&bands[n]),
                }
            })
        }),
    )?;
    write_exp_policy(out, thetas, &sol.policy, bands)?;
    let depth0 = (0..=m.x_max)
        .map(|x| {
            let (j, eu, ce) = (sol.value(x), sol.expected_utility(x), sol.certainty_equivalent(x)?);
            Ok(ExpRoot {
                x,
                j_lo: j.lo,
                j_hi: j.hi,
                expected_utility_lo: eu.lo,
                expected_utility_hi: eu.hi,
                certainty_equivalent_lo: ce.lo,
                certainty_equivalent_hi: ce.hi,
            })
        })
        .collect::<Result<Vec<_>, Error>>()?;
    let summary = ExpSummary {
        utility: Utility::Exponential.name(),
        beta: m.schedule.beta,
        gamma: m.gamma(),
        depth: m.depth(),
        x_max: m.x_max,
        tail_eps: m.tail_eps,
        s_star: m.s_star,
        root_width: sol.table.root_width(),
        max_barrier: sol.policy.max_barrier(),
        violations,
        depth0,
    };
    out.json(SUMMARY, &summary)?;
    violations_failure("exponential", &summary.violations)
}

fn solve_exp_cmd(c: &Common) -> Outcome {
    let (cfg, out) = load(c)?;
    expect_utility(&cfg, &[Utility::Exponential], "solve-exp")?;
    let sol = solve_exp(&cfg)?;
    let (bands, mut violations) = exp_bands(&sol.policy);
    violations.extend(check_exp_invariants(&sol));
    write_exp(&out, &sol, violations, &bands)
}

// ---------------------------------------------------------------- howard

#[derive(Serialize)]
struct HowardRow {
    iteration: usize,
    n: usize,
    x: i64,
    action: i64,
    j_hi: f64,
}

#[derive(Serialize)]
struct HowardSummary {
    iterations: usize,
    final_gap: f64,
    depth: usize,
    x_max: i64,
    matches_value_iteration: bool,
    /// Largest depth-0 difference to value iteration, and the combined bracket widths there.
    max_value_gap: f64,
    combined_width: f64,
}

fn howard_cmd(c: &Common, max_iterations: usize) -> Outcome {
    let (cfg, out) = load(c)?;
    expect_utility(&cfg, &[Utility::Exponential], "howard")?;
    let model = ExpModel::from_config(&cfg)?;
    let x_max = model.x_max;
    let res = howard_solve(&model, DecisionRule::pay_all(model.depth(), x_max), max_iterations)?;
    let vi = solve_exp_model(model.clone())?;
    out.csv(
        VALUES,
        res.steps.iter().enumerate().flat_map(|(k, step)| {
            (0..step.rule.depth()).flat_map(move |n| {
                (0..=x_max).map(move |x| HowardRow {
                    iteration: k,
                    n,
                    x,
                    action: step.rule.action(n, x),
                    j_hi: step.value.get(n, x).hi,
                })
            })
        }),
    )?;
    let (bands, bad) = exp_bands(&res.policy);
    write_exp_policy(&out, &res.table.thetas, &res.policy, &bands)?;
    let mut gap: f64 = 0.0;
    let mut width: f64 = 0.0;
    let mut within = true;
    for x in 0..=x_max {
        let (a, b) = (res.table.get(0, x), vi.value(x));
        let (g, w) = ((a.hi - b.hi).abs().max((a.lo - b.lo).abs()), a.width() + b.width());
        within &= g <= w + 1e-15;
        gap = gap.max(g);
        width = width.max(w);
    }
    let summary = HowardSummary {
        iterations: res.iterations,
        final_gap: res.final_gap,
        depth: model.depth(),
        x_max,
        matches_value_iteration: res.policy == vi.policy && within,
        max_value_gap: gap,
        combined_width: width,
    };
    out.json(SUMMARY, &summary)?;
    violations_failure("band", &bad)?;
    if !summary.matches_value_iteration {
        return Err(Failure::Invariant("policy iteration and value iteration disagree".into()));
    }
    Ok(())
}

// ---------------------------------------------------------------- power / log

#[derive(Serialize)]
struct PowerValueRow {
    d: usize,
    x: i64,
    s: f64,
    w_lo: f64,
    w_hi: f64,
    action: i64,
    xi_of_s: i64,
}

#[derive(Serialize)]
struct PowerBarrierRow {
    d: usize,
    s: f64,
    xi_of_s: i64,
}

#[derive(Serialize)]
struct PowerRoot {
    x: i64,
    j_hat_lo: f64,
    j_hat_hi: f64,
    certainty_equivalent: f64,
}

#[derive(Serialize)]
struct PowerSummary {
    utility: &'static str,
    beta: f64,
    gamma: f64,
    y0: f64,
    depth: usize,
    x_max: i64,
    grid_points: Vec<usize>,
    xi_bound: f64,
    max_xi: i64,
    root_width: f64,
    barrier_error: Option<String>,
    checks: PowerCheckReport,
    depth0: Vec<PowerRoot>,
}

fn solve_power_cmd(c: &Common, utility: Utility) -> Outcome {
    let (cfg, out) = load(c)?;
    let sol = match utility {
        Utility::Logarithmic => {
            expect_utility(&cfg, &[Utility::Logarithmic], "solve-log")?;
            solve_log(&cfg)?
        }
        _ => {
            expect_utility(&cfg, &[Utility::Power], "solve-power")?;
            solve_power(&cfg)?
        }
    };
    write_power(&out, &cfg, &sol)
}

fn write_power(out: &OutputDir, cfg: &ProblemConfig, sol: &PowerSolution) -> Outcome {
    let m = &sol.model;
    let p = &sol.policy;
    out.csv(
        VALUES,
        (0..m.depth).flat_map(|d| {
            (0..=m.x_max).flat_map(move |x| {
                (0..m.grids[d].len()).map(move |i| {
                    let v = sol.table_value(d, x, i);
                    PowerValueRow {
                        d,
                        x,
                        s: m.grids[d].points[i],
                        w_lo: v.lo,
                        w_hi: v.hi,
                        action: p.at(d, x, i),
                        xi_of_s: p.barrier(d, i),
                    }
                })
            })
        }),
    )?;
    out.csv(
        POLICY,
        (0..m.depth).flat_map(|d| {
            (0..m.grids[d].len()).map(move |i| PowerBarrierRow { d, s: m.grids[d].points[i], xi_of_s: p.barrier(d, i) })
        }),
    )?;
    let barrier = barrier_diagnostics(sol);
    let checks = check_power_invariants(sol);
    let depth0 = (0..=m.x_max)
        .map(|x| {
            let v = sol.value(x);
            Ok(PowerRoot { x, j_hat_lo: v.lo, j_hat_hi: v.hi, certainty_equivalent: sol.certainty_equivalent(x)? })
        })
        .collect::<Result<Vec<_>, Error>>()?;
    let summary = PowerSummary {
        utility: cfg.utility.name(),
        beta: m.beta,
        gamma: cfg.gamma,
        y0: m.y0,
        depth: m.depth,
        x_max: m.x_max,
        grid_points: m.grids.iter().map(|g| g.len()).collect(),
        xi_bound: xi_star_bound(&m.dist, m.beta),
        max_xi: p.max_barrier(),
        root_width: sol.root_width(),
        barrier_error: barrier.as_ref().err().map(ToString::to_string),
        checks,
        depth0,
    };
    out.json(SUMMARY, &summary)?;
    barrier?;
    violations_failure("power", &summary.checks.violations)
}

// ---------------------------------------------------------------- neutral

#[derive(Serialize)]
struct NeutralValueRow {
    x: i64,
    v_lo: f64,
    v_hi: f64,
    action: i64,
}

#[derive(Serialize)]
struct NeutralPolicyRow {
    x: i64,
    action: i64,
}

#[derive(Serialize)]
struct NeutralBandRow {
    xi: i64,
    bands: usize,
    band_cuts: String,
}

#[derive(Serialize)]
struct NeutralSummary {
    utility: &'static str,
    beta: f64,
    x_max: i64,
    iterations: usize,
    barrier: i64,
    barrier_bound: f64,
    band_cuts: String,
}

fn write_neutral_bands(out: &OutputDir, sol: &NeutralSolution) -> io::Result<()> {
    out.csv(
        BANDS,
        [NeutralBandRow { xi: sol.band.top(), bands: sol.band.bands(), band_cuts: sol.band.cuts_string() }],
    )
}

fn neutral_summary(cfg: &ProblemConfig, sol: &NeutralSolution) -> NeutralSummary {
    NeutralSummary {
        utility: Utility::RiskNeutral.name(),
        beta: cfg.beta,
        x_max: cfg.x_max,
        iterations: sol.iterations,
        barrier: sol.band.top(),
        barrier_bound: neutral_barrier_bound(&cfg.dist, cfg.beta),
        band_cuts: sol.band.cuts_string(),
    }
}

fn solve_neutral_cmd(c: &Common) -> Outcome {
    let (cfg, out) = load(c)?;
    expect_utility(&cfg, &[Utility::RiskNeutral], "solve-neutral")?;
    let sol = solve_neutral(&cfg)?;
    out.csv(
        VALUES,
        sol.values.iter().zip(0..).map(|(v, x)| NeutralValueRow { x, v_lo: v.lo, v_hi: v.hi, action: sol.action(x) }),
    )?;
    out.csv(POLICY, (0..=cfg.x_max).map(|x| NeutralPolicyRow { x, action: sol.action(x) }))?;
    write_neutral_bands(&out, &sol)?;
    out.json(SUMMARY, &neutral_summary(&cfg, &sol))?;
    Ok(())
}

// ---------------------------------------------------------------- bands

#[derive(Serialize)]
struct BandsSummary {
    depth: usize,
    x_max: i64,
    max_bands: usize,
    max_barrier: i64,
    violations: Vec<Violation>,
}

fn bands_cmd(c: &Common) -> Outcome {
    let (cfg, out) = load(c)?;
    expect_utility(&cfg, &[Utility::Exponential, Utility::RiskNeutral], "bands")?;
    if cfg.utility == Utility::RiskNeutral {
        let sol = solve_neutral(&cfg)?;
        write_neutral_bands(&out, &sol)?;
        out.json(SUMMARY, &neutral_summary(&cfg, &sol))?;
        return Ok(());
    }
    let sol = solve_exp(&cfg)?;
    let (bands, violations) = exp_bands(&sol.policy);
    write_exp_policy(&out, &sol.table.thetas, &sol.policy, &bands)?;
    let summary = BandsSummary {
        depth: sol.model.depth(),
        x_max: sol.model.x_max,
        max_bands: bands.iter().flatten().map(BandFunction::bands).max().unwrap_or(0),
        max_barrier: sol.policy.max_barrier(),
        violations,
    };
    out.json(SUMMARY, &summary)?;
    violations_failure("band", &summary.violations)
}

// ---------------------------------------------------------------- oracle

#[derive(Serialize)]
struct OracleRow {
    x: i64,
    solver_lo: f64,
    solver_hi: f64,
    oracle_lo: f64,
    oracle_hi: f64,
    gap: f64,
    tolerance: f64,
    pass: bool,
}

#[derive(Serialize)]
struct OracleSummary {
    utility: &'static str,
    horizon: usize,
    passed: bool,
    max_gap: f64,
    nodes: usize,
    rows: Vec<OracleRow>,
}

/// Absolute slack for comparing values computed in different orders.
const ORACLE_ABS_TOL: f64 = 1e-10;

fn oracle_cmd(c: &Common, x0: Option<i64>) -> Outcome {
    let (cfg, out) = load(c)?;
    expect_utility(&cfg, &[Utility::Exponential, Utility::Power, Utility::Logarithmic], "oracle-check")?;
    let horizon = cfg.depth.ok_or_else(|| Failure::Invalid("oracle-check needs an explicit depth".into()))?;
    let starts: Vec<i64> = match x0 {
        Some(x) => vec![x],
        None => (0..=cfg.x_max).collect(),
    };
    let lower = OracleProblem::from_config(&cfg, horizon, Terminal::TailLower)?;
    let upper = OracleProblem::from_config(&cfg, horizon, Terminal::TailUpper)?;
    let mut nodes = 0;
    let mut oracle = |x: i64| -> Result<(f64, f64), Error> {
        let (a, b) = (exact_optimal(&lower, x)?, exact_optimal(&upper, x)?);
        nodes += a.nodes + b.nodes;
        Ok((a.value, b.value))
    };
    let mut rows = Vec::new();
    if cfg.utility == Utility::Exponential {
        let sol = solve_exp(&cfg)?;
        let n = sol.model.depth();
        let tail = sol.model.schedule.h_upper(n).hi - sol.model.schedule.h_lower(n).lo;
        let tolerance = tail + ORACLE_ABS_TOL;
        for &x in &starts {
            let (o_lo, o_hi) = oracle(x)?;
            let v = sol.value(x);
            let gap = (o_lo - v.lo).abs().max((o_hi - v.hi).abs());
            rows.push(OracleRow {
                x,
                solver_lo: v.lo,
                solver_hi: v.hi,
                oracle_lo: o_lo,
                oracle_hi: o_hi,
                gap,
                tolerance,
                pass: gap <= tolerance,
            });
        }
    } else {
        let sol = if cfg.utility == Utility::Power { solve_power(&cfg)? } else { solve_log(&cfg)? };
        for &x in &starts {
            let (o_lo, o_hi) = oracle(x)?;
            let v = sol.value(x);
            // The solver bracket must contain the exact tail-closed bracket.
            let slack = 1e-12 * o_lo.abs().max(o_hi.abs()).max(1.0);
            let gap = (o_lo - v.lo).max(v.hi - o_hi);
            rows.push(OracleRow {
                x,
                solver_lo: v.lo,
                solver_hi: v.hi,
                oracle_lo: o_lo,
                oracle_hi: o_hi,
                gap,
                tolerance: v.width(),
                pass: v.lo <= o_lo + slack && o_hi <= v.hi + slack,
            });
        }
    }
    out.csv(VALUES, rows.iter())?;
    let summary = OracleSummary {
        utility: cfg.utility.name(),
        horizon,
        passed: rows.iter().all(|r| r.pass),
        max_gap: rows.iter().map(|r| r.gap).fold(0.0, f64::max),
        nodes,
        rows,
    };
    out.json(SUMMARY, &summary)?;
    if summary.passed {
        Ok(())
    } else {
        Err(Failure::Invariant(format!("solver and oracle disagree (max gap {:e})", summary.max_gap)))
    }
}

// ---------------------------------------------------------------- simulate

#[derive(Serialize)]
struct PathRow {
    path: usize,
    discounted_dividends: f64,
    utility: f64,
    ruin_time: Option<usize>,
    truncated: bool,
}

#[derive(Serialize)]
struct SimulateSummary {
    #[serde(flatten)]
    summary: SimulationSummary,
    x0: i64,
    max_steps: usize,
    seed: u64,
    ruin_check: RuinCheck,
}

fn simulate_cmd(c: &Common, x0: i64, paths: usize, max_steps: usize) -> Outcome {
    let (cfg, out) = load(c)?;
    match cfg.utility {
        Utility::Exponential => simulate_with(&out, &cfg, &solve_exp(&cfg)?.policy, x0, paths, max_steps),
        Utility::Power => simulate_with(&out, &cfg, &solve_power(&cfg)?.policy, x0, paths, max_steps),
        Utility::Logarithmic => simulate_with(&out, &cfg, &solve_log(&cfg)?.policy, x0, paths, max_steps),
        Utility::RiskNeutral => simulate_with(&out, &cfg, &solve_neutral(&cfg)?, x0, paths, max_steps),
    }
}

fn simulate_with(
    out: &OutputDir,
    cfg: &ProblemConfig,
    rule: &dyn DividendRule,
    x0: i64,
    paths: usize,
    max_steps: usize,
) -> Outcome {
    let sim = simulate_paths(cfg, rule, x0, paths, max_steps, cfg.seed)?;
    out.csv(
        VALUES,
        sim.paths.iter().enumerate().map(|(path, p)| PathRow {
            path,
            discounted_dividends: p.discounted_dividends,
            utility: p.utility,
            ruin_time: p.ruin_time,
            truncated: p.truncated,
        }),
    )?;
    let ruin_check = assess_ruin(cfg, rule, &sim.summary, max_steps);
    let passed = ruin_check.passed;
    out.json(SUMMARY, &SimulateSummary { summary: sim.summary, x0, max_steps, seed: cfg.seed, ruin_check })?;
    match passed {
        Some(false) => Err(Failure::Invariant("ruin fraction below the block bound".into())),
        _ => Ok(()),
    }
}
