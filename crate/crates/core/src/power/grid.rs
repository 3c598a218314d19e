use serde::{Deserialize, Serialize};

/// Points closer than this (relative) are treated as the same point.
pub const HIT_REL_TOL: f64 = 1e-12;

/// Largest lattice added to any single depth.
pub const LATTICE_CAP: usize = 200_000;

/// Sorted accumulated-dividend grid for one depth.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SGrid {
    pub points: Vec<f64>,
    /// Whether each point is an exact reachable value rather than a uniform node.
    pub lattice: Vec<bool>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Position {
    Hit(usize),
    /// Strictly between points `i` and `i + 1`.
    Between(usize),
    Below,
    Above,
}

fn close(a: f64, b: f64) -> bool {
    (a - b).abs() <= HIT_REL_TOL * a.abs().max(b.abs()).max(1.0)
}

impl SGrid {
    pub fn uniform(start: f64, span: f64, m: usize) -> Self {
        let h = span / (m - 1) as f64;
        let points = (0..m).map(|i| start + h * i as f64).collect();
        SGrid { points, lattice: vec![false; m] }
    }

    /// Merges `extra` into the grid, marking those points as lattice points.
    pub fn with_lattice(mut self, extra: &[f64]) -> Self {
        let mut all: Vec<(f64, bool)> = self.points.iter().map(|&p| (p, false)).collect();
        all.extend(extra.iter().map(|&p| (p, true)));
        all.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut merged: Vec<(f64, bool)> = Vec::with_capacity(all.len());
        for (p, lat) in all {
            match merged.last_mut() {
                Some(last) if close(last.0, p) => {
                    // Keep the exact lattice value when a uniform node coincides with it.
                    if lat && !last.1 {
                        *last = (p, true);
                    }
                }
                _ => merged.push((p, lat)),
            }
        }
        self.points = merged.iter().map(|m| m.0).collect();
        self.lattice = merged.iter().map(|m| m.1).collect();
        self
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn locate(&self, s: f64) -> Position {
        let i = self.points.partition_point(|&p| p < s);
        if i < self.len() && close(self.points[i], s) {
            return Position::Hit(i);
        }
        if i > 0 && close(self.points[i - 1], s) {
            return Position::Hit(i - 1);
        }
        if i == 0 {
            Position::Below
        } else if i == self.len() {
            Position::Above
        } else {
            Position::Between(i - 1)
        }
    }

    /// Index of the largest point not above `s` (the first point if none).
    pub fn floor_index(&self, s: f64) -> usize {
        match self.locate(s) {
            Position::Hit(i) | Position::Between(i) => i,
            Position::Below => 0,
            Position::Above => self.len() - 1,
        }
    }

    pub fn hit(&self, s: f64) -> Option<usize> {
        match self.locate(s) {
            Position::Hit(i) => Some(i),
            _ => None,
        }
    }
}

fn dedup_sorted(mut v: Vec<f64>) -> Vec<f64> {
    v.sort_by(f64::total_cmp);
    v.dedup_by(|a, b| close(*a, *b));
    v
}

/// Exact accumulated-dividend values reachable at each depth `0..depth`.
///
/// Depth `d` holds `r + beta^d b` for `b <= overflow`, where `r` ranges over
/// sums `y0 + sum_{m<d} beta^m c_m` with `c_m <= step_max`. Evaluations issued
/// from these points at depth `d + 1`, including capped overflow, land on the
/// depth-`d + 1` set again. Returns `None` from the first depth that would
/// exceed [`LATTICE_CAP`].
pub fn reachable_lattices(y0: f64, beta: f64, step_max: i64, overflow: i64, depth: usize) -> Vec<Option<Vec<f64>>> {
    let mut out = Vec::with_capacity(depth);
    let mut roots = vec![y0];
    let mut scale = 1.0;
    let mut exhausted = false;
    for _ in 0..depth {
        if exhausted || roots.len() * (overflow as usize + 1) > LATTICE_CAP {
            exhausted = true;
            out.push(None);
            continue;
        }
        let pts: Vec<f64> = roots.iter().flat_map(|&r| (0..=overflow).map(move |b| r + scale * b as f64)).collect();
        out.push(Some(dedup_sorted(pts)));
        if roots.len() * (step_max as usize + 1) > LATTICE_CAP {
            exhausted = true;
        } else {
            roots = dedup_sorted(roots.iter().flat_map(|&r| (0..=step_max).map(move |c| r + scale * c as f64)).collect());
        }
        scale *= beta;
    }
    out
}
