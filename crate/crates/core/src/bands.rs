use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exp::ExpPolicy;

/// Alternating "pay nothing" / "pay down to `c_k`" structure of a decision rule.
///
/// The rule is 0 on `x <= c_0` and on `d_k <= x <= c_k`, and `x - c_k` on
/// `c_k < x < d_{k+1}` and on `x > c_n`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BandFunction {
    pub c: Vec<i64>,
    pub d: Vec<i64>,
}

impl BandFunction {
    /// A single barrier at `xi`.
    pub fn barrier(xi: i64) -> Self {
        BandFunction { c: vec![xi], d: vec![] }
    }

    pub fn bands(&self) -> usize {
        self.d.len()
    }

    /// Top barrier `c_n`.
    pub fn top(&self) -> i64 {
        *self.c.last().expect("band function has c_0")
    }

    pub fn eval(&self, x: i64) -> i64 {
        if x < 0 {
            return 0;
        }
        // Last c_k strictly below x decides unless x sits in a zero band.
        let mut out = 0;
        for k in 0..self.c.len() {
            if x <= self.c[k] {
                return if k == 0 || x >= self.d[k - 1] { 0 } else { out };
            }
            out = x - self.c[k];
        }
        out
    }

    /// Checks the ordering constraints of the definition.
    pub fn validate(&self) -> Result<()> {
        let bad = |reason: String| Err(Error::NotABand { depth: 0, reason });
        if self.c.len() != self.d.len() + 1 {
            return bad(format!("{} cuts c but {} cuts d", self.c.len(), self.d.len()));
        }
        if self.c[0] < 0 {
            return bad(format!("c_0 = {} is negative", self.c[0]));
        }
        for k in 1..self.c.len() {
            let (c_prev, d_k, c_k) = (self.c[k - 1], self.d[k - 1], self.c[k]);
            if d_k - c_prev < 2 {
                return bad(format!("d_{k} - c_{} = {} < 2", k - 1, d_k - c_prev));
            }
            if c_k < d_k {
                return bad(format!("c_{k} = {c_k} < d_{k} = {d_k}"));
            }
        }
        Ok(())
    }

    /// Parses a decision column `col[x]`, `x = 0..len`; columns are assumed to
    /// continue as `x - top` beyond their end.
    pub fn from_column(col: &[i64]) -> Result<Self> {
        let bad = |reason: String| Err(Error::NotABand { depth: 0, reason });
        if col.is_empty() {
            return bad("empty column".into());
        }
        if col[0] != 0 {
            return bad(format!("action {} at zero surplus", col[0]));
        }
        let len = col.len();
        let zero_run_end = |mut i: usize| {
            while i + 1 < len && col[i + 1] == 0 {
                i += 1;
            }
            i
        };
        let mut i = zero_run_end(0);
        let (mut c, mut d) = (vec![i as i64], vec![]);
        while i + 1 < len {
            let base = i as i64;
            let mut j = i + 1;
            while j < len && col[j] != 0 {
                let want = j as i64 - base;
                if col[j] != want {
                    return bad(format!("action {} at x = {j}, expected {want} or 0", col[j]));
                }
                j += 1;
            }
            if j == len {
                break;
            }
            d.push(j as i64);
            i = zero_run_end(j);
            c.push(i as i64);
        }
        let band = BandFunction { c, d };
        band.validate()?;
        Ok(band)
    }

    /// `c_0;d_1;c_1;...;d_n;c_n`
    pub fn cuts_string(&self) -> String {
        let mut parts = vec![self.c[0].to_string()];
        for (d, c) in self.d.iter().zip(&self.c[1..]) {
            parts.push(d.to_string());
            parts.push(c.to_string());
        }
        parts.join(";")
    }
}

impl fmt::Display for BandFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.cuts_string())
    }
}

impl FromStr for BandFunction {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        let nums = s
            .split(';')
            .map(|p| p.trim().parse::<i64>())
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(|e| Error::NotABand { depth: 0, reason: format!("bad cut list '{s}': {e}") })?;
        if nums.len() % 2 == 0 {
            return Err(Error::NotABand { depth: 0, reason: format!("cut list '{s}' has even length") });
        }
        let c = nums.iter().step_by(2).copied().collect();
        let d = nums.iter().skip(1).step_by(2).copied().collect();
        let band = BandFunction { c, d };
        band.validate()?;
        Ok(band)
    }
}

/// Band structure of every depth of an exponential policy.
pub fn extract_bands(policy: &ExpPolicy) -> Result<Vec<BandFunction>> {
    policy
        .actions
        .iter()
        .enumerate()
        .map(|(n, col)| {
            let band = BandFunction::from_column(col).map_err(|e| with_depth(e, n))?;
            if let Some(x) = (0..col.len()).find(|&x| band.eval(x as i64) != col[x]) {
                return Err(Error::NotABand {
                    depth: n,
                    reason: format!("band {band} does not reproduce action {} at x = {x}", col[x]),
                });
            }
            Ok(band)
        })
        .collect()
}

fn with_depth(e: Error, depth: usize) -> Error {
    match e {
        Error::NotABand { reason, .. } => Error::NotABand { depth, reason },
        other => other,
    }
}
