use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use dividend_core::model::{DEFAULT_GRID_POINTS, DEFAULT_TAIL_EPS};
use dividend_core::{validate_distribution, Error, IncomeDistribution, ProblemConfig, Utility};
use serde::Deserialize;

/// Two-point income family: `+1` with probability `p`, `-claim` otherwise.
#[derive(Debug, Clone, Copy, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Preset {
    pub p: f64,
    pub claim: i64,
}

/// On-disk TOML configuration.
///
/// ```toml
/// utility = "exponential"
/// beta = 0.9
/// gamma = -0.5
/// x_max = 45
/// output_dir = "out"
///
/// [distribution]
/// -1 = 0.4
/// 1 = 0.6
/// ```
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub beta: f64,
    #[serde(default)]
    pub gamma: Option<f64>,
    pub utility: Utility,
    #[serde(default)]
    pub distribution: Option<BTreeMap<String, f64>>,
    #[serde(default)]
    pub distribution_preset: Option<Preset>,
    pub x_max: i64,
    #[serde(default)]
    pub depth: Option<usize>,
    #[serde(default)]
    pub tail_eps: Option<f64>,
    #[serde(default)]
    pub s_grid_points: Option<usize>,
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
    /// Initial wealth for power and log utility.
    #[serde(default)]
    pub y0: Option<f64>,
}

#[derive(Debug)]
pub enum ConfigError {
    Io(std::io::Error),
    Parse(String),
    Invalid(Error),
}

impl std::fmt::Display for ConfigError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            ConfigError::Io(e) => write!(f, "cannot read config: {e}"),
            ConfigError::Parse(e) => write!(f, "cannot parse config: {e}"),
            ConfigError::Invalid(e) => write!(f, "invalid config: {e}"),
        }
    }
}

impl FileConfig {
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(ConfigError::Io)?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        toml::from_str(text).map_err(|e| ConfigError::Parse(e.to_string()))
    }

    pub fn dist(&self) -> Result<IncomeDistribution, ConfigError> {
        let invalid = |m: String| ConfigError::Invalid(Error::InvalidConfig(m));
        match (&self.distribution, &self.distribution_preset) {
            (Some(_), Some(_)) => Err(invalid("give either distribution or distribution_preset, not both".into())),
            (None, None) => Err(invalid("missing distribution".into())),
            (None, Some(p)) => IncomeDistribution::two_point(p.p, p.claim).map_err(ConfigError::Invalid),
            (Some(raw), None) => {
                let mut map = BTreeMap::new();
                for (k, q) in raw {
                    let k: i64 = k.trim().parse().map_err(|_| invalid(format!("income {k:?} is not an integer")))?;
                    if map.insert(k, *q).is_some() {
                        return Err(invalid(format!("income {k} listed twice")));
                    }
                }
                validate_distribution(&map).map_err(ConfigError::Invalid)
            }
        }
    }

    pub fn problem(&self) -> Result<ProblemConfig, ConfigError> {
        let gamma = match (self.gamma, self.utility) {
            (Some(g), _) => g,
            (None, Utility::RiskNeutral | Utility::Logarithmic) => 0.0,
            (None, u) => return Err(ConfigError::Invalid(Error::InvalidConfig(format!("{u} utility needs gamma")))),
        };
        let mut cfg = ProblemConfig::new(self.utility, self.beta, gamma, self.dist()?, self.x_max)
            .map_err(ConfigError::Invalid)?
            .with_tail_eps(self.tail_eps.unwrap_or(DEFAULT_TAIL_EPS))
            .with_grid_points(self.s_grid_points.unwrap_or(DEFAULT_GRID_POINTS))
            .with_seed(self.seed.unwrap_or(0));
        if let Some(n) = self.depth {
            cfg = cfg.with_depth(n);
        }
        if let Some(y0) = self.y0 {
            cfg = cfg.with_y0(y0);
        }
        cfg.validate().map_err(ConfigError::Invalid)?;
        Ok(cfg)
    }

    pub fn output_dir(&self) -> PathBuf {
        self.output_dir.clone().unwrap_or_else(|| PathBuf::from("out"))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const BASE: &str = "beta = 0.9\ngamma = -0.5\nutility = \"exponential\"\nx_max = 45\n";

    #[test]
    fn explicit_distribution() {
        let c = FileConfig::parse(&format!("{BASE}[distribution]\n-1 = 0.4\n1 = 0.6\n")).unwrap();
        let d = c.dist().unwrap();
        assert_eq!(d.prob(-1), 0.4);
        assert_eq!(d.prob(1), 0.6);
        assert_eq!(c.problem().unwrap().x_max, 45);
    }

    #[test]
    fn preset_expands_to_two_points() {
        let c = FileConfig::parse(&format!("{BASE}distribution_preset = {{ p = 0.6, claim = 2 }}\n")).unwrap();
        let d = c.dist().unwrap();
        assert_eq!(d.prob(1), 0.6);
        assert!((d.prob(-2) - 0.4).abs() < 1e-15);
        assert_eq!(d.support_len(), 2);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let err = FileConfig::parse(&format!("{BASE}colour = 3\n")).unwrap_err();
        assert!(matches!(err, ConfigError::Parse(_)));
    }

    #[test]
    fn bad_distributions_are_invalid() {
        let c = FileConfig::parse(&format!("{BASE}[distribution]\n1 = 1.0\n")).unwrap();
        assert!(matches!(c.problem(), Err(ConfigError::Invalid(Error::NoRuinRisk))));
        let c = FileConfig::parse(&format!("{BASE}[distribution]\nx = 1.0\n")).unwrap();
        assert!(matches!(c.dist(), Err(ConfigError::Invalid(_))));
        let c = FileConfig::parse(BASE).unwrap();
        assert!(c.dist().is_err());
    }

    #[test]
    fn power_needs_gamma() {
        let c = FileConfig::parse("beta = 0.9\nutility = \"power\"\nx_max = 5\n[distribution]\n-1 = 1.0\n").unwrap();
        assert!(matches!(c.problem(), Err(ConfigError::Invalid(_))));
    }
}
