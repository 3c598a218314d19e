//! Optimal dividend payout under risk-sensitive utilities.
//!
//! Solvers return two-sided brackets on the value function together with the
//! optimal decision rules; an exact history-tree oracle and a Monte Carlo
//! simulator are provided for validation.

pub mod bands;
pub mod bracket;
pub mod error;
pub mod exp;
pub mod howard;
pub mod model;
pub mod neutral;
pub mod oracle;
pub mod power;
pub mod simulate;

pub use bands::{extract_bands, BandFunction};
pub use bracket::Bracket;
pub use error::{Error, Result};
pub use exp::checks::{check_exp_invariants, Violation};
pub use exp::schedule::{h_lower, h_upper, mgf_plus, s_bound, ThetaSchedule};
pub use exp::{bellman_backup_exp, solve_exp, ExpModel, ExpPolicy, ExpSolution, ExpValueTable};
pub use howard::{howard_solve, improve, policy_value_exp, DecisionRule, HowardResult};
pub use model::{
    action_set, arrow_pratt, certainty_equivalent, step, utility, validate_distribution, IncomeDistribution,
    ProblemConfig, SurplusState, Utility,
};
pub use neutral::{solve_neutral, NeutralSolution};
pub use oracle::{exact_optimal, exact_policy_value, OracleProblem, OracleSolution, Terminal};
pub use power::checks::check_power_invariants;
pub use power::{
    barrier_diagnostics, solve_log, solve_power, t_backup, xi_star_bound, PowerPolicy, PowerSolution,
    PowerValueTable,
};
pub use simulate::{assess_ruin, ruin_certainty_check, simulate_paths, DividendRule, RuinCheck, Simulation, SimulationSummary};
