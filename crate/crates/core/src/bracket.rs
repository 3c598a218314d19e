use serde::{Deserialize, Serialize};

/// Closed interval `[lo, hi]` known to contain an exact value.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bracket {
    pub lo: f64,
    pub hi: f64,
}

impl Bracket {
    pub fn new(lo: f64, hi: f64) -> Self {
        debug_assert!(lo <= hi, "inverted bracket [{lo}, {hi}]");
        Bracket { lo, hi }
    }

    pub fn point(v: f64) -> Self {
        Bracket { lo: v, hi: v }
    }

    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }

    pub fn mid(&self) -> f64 {
        0.5 * (self.lo + self.hi)
    }

    pub fn contains(&self, v: f64) -> bool {
        self.lo <= v && v <= self.hi
    }

    pub fn contains_within(&self, v: f64, slack: f64) -> bool {
        self.lo - slack <= v && v <= self.hi + slack
    }

    /// Image under an increasing function.
    pub fn map_increasing(&self, f: impl Fn(f64) -> f64) -> Bracket {
        Bracket::new(f(self.lo), f(self.hi))
    }

    pub fn exp(&self) -> Bracket {
        self.map_increasing(f64::exp)
    }

    pub fn intersects(&self, other: &Bracket, slack: f64) -> bool {
        self.lo <= other.hi + slack && other.lo <= self.hi + slack
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn width_and_containment() {
        let b = Bracket::new(1.0, 1.5);
        assert_eq!(b.width(), 0.5);
        assert!(b.contains(1.2));
        assert!(!b.contains(1.6));
        assert!(b.contains_within(1.6, 0.2));
        assert_eq!(b.mid(), 1.25);
    }

    #[test]
    fn increasing_image() {
        let b = Bracket::new(0.0, 1.0).exp();
        assert_eq!(b.lo, 1.0);
        assert_eq!(b.hi, std::f64::consts::E);
    }
}
