//! Domain intervals, canonical point keys, and grid-tabulated functions.
//!
//! All real-valued functions in this crate are data, not code: a function
//! is a list of `(x, value)` pairs over a grid, extended to the rest of
//! its x-hull by linear interpolation. Support points and data values are
//! identified up to canonical rounding at 12 decimal digits, so that
//! deduplication and alphabet construction are deterministic.

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Rounding scale for canonical point identity (12 decimal digits).
const KEY_SCALE: f64 = 1e12;

/// Canonical integer key of a coordinate: two points are "the same" when
/// their keys match. Intentionally coarse enough to absorb solver round-off
/// but fine enough not to merge deliberately close atoms.
pub fn canonical_key(x: f64) -> i64 {
    (x * KEY_SCALE).round() as i64
}

/// The value a canonical key stands for.
pub fn key_value(k: i64) -> f64 {
    k as f64 / KEY_SCALE
}

/// Canonically rounded coordinate.
pub fn canonicalize(x: f64) -> f64 {
    key_value(canonical_key(x))
}

#[derive(Debug, Error, PartialEq)]
pub enum GridError {
    #[error("empty interval: lo {lo} > hi {hi}")]
    EmptyInterval { lo: f64, hi: f64 },
    #[error("non-finite coordinate {0}")]
    NonFinite(f64),
    #[error("function has no tabulation points")]
    EmptyTabulation,
    #[error("function undefined at {x}: tabulated hull is [{lo}, {hi}]")]
    UndefinedAt { x: f64, lo: f64, hi: f64 },
}

/// Closed real interval, the domain of every measure in a problem.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

impl Interval {
    pub fn new(lo: f64, hi: f64) -> Result<Self, GridError> {
        if !lo.is_finite() {
            return Err(GridError::NonFinite(lo));
        }
        if !hi.is_finite() {
            return Err(GridError::NonFinite(hi));
        }
        if lo > hi {
            return Err(GridError::EmptyInterval { lo, hi });
        }
        Ok(Self { lo, hi })
    }

    /// Unit interval `[0, 1]`, the domain of most worked instances.
    pub fn unit() -> Self {
        Self { lo: 0.0, hi: 1.0 }
    }

    pub fn contains(&self, x: f64) -> bool {
        // Canonical slack so that a point rounding onto an endpoint counts.
        x >= self.lo - 0.5 / KEY_SCALE && x <= self.hi + 0.5 / KEY_SCALE
    }

    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }

    pub fn clamp(&self, x: f64) -> f64 {
        x.clamp(self.lo, self.hi)
    }

    /// `n` uniformly spaced points including both endpoints.
    pub fn uniform_grid(&self, n: usize) -> Vec<f64> {
        assert!(n >= 2, "a grid needs at least both endpoints");
        (0..n)
            .map(|i| self.lo + self.width() * i as f64 / (n - 1) as f64)
            .collect()
    }
}

/// A real function tabulated on a finite grid, extended by linear
/// interpolation between consecutive nodes. Evaluation outside the
/// tabulated hull is an error rather than an extrapolation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridFn {
    /// Node x-coordinates, strictly increasing after canonical rounding.
    xs: Vec<f64>,
    /// Node values, same length as `xs`.
    ys: Vec<f64>,
}

impl GridFn {
    /// Builds from `(x, value)` pairs, sorted by x. Among pairs with
    /// canonically equal x the first kept wins; callers tabulate
    /// functions, so duplicates agree anyway.
    pub fn from_pairs(pairs: &[(f64, f64)]) -> Result<Self, GridError> {
        if pairs.is_empty() {
            return Err(GridError::EmptyTabulation);
        }
        let mut keyed: Vec<(i64, f64)> = Vec::with_capacity(pairs.len());
        for &(x, y) in pairs {
            if !x.is_finite() {
                return Err(GridError::NonFinite(x));
            }
            if !y.is_finite() {
                return Err(GridError::NonFinite(y));
            }
            keyed.push((canonical_key(x), y));
        }
        keyed.sort_by_key(|&(k, _)| k);
        keyed.dedup_by_key(|&mut (k, _)| k);
        let xs = keyed.iter().map(|&(k, _)| key_value(k)).collect();
        let ys = keyed.iter().map(|&(_, y)| y).collect();
        Ok(Self { xs, ys })
    }

    /// Tabulates `f` on the given grid points.
    pub fn from_fn(grid: &[f64], f: impl Fn(f64) -> f64) -> Result<Self, GridError> {
        let pairs: Vec<(f64, f64)> = grid.iter().map(|&x| (x, f(x))).collect();
        Self::from_pairs(&pairs)
    }

    /// The identity function tabulated on a grid (exact under
    /// interpolation).
    pub fn identity(grid: &[f64]) -> Result<Self, GridError> {
        Self::from_fn(grid, |x| x)
    }

    /// Constant function on a grid.
    pub fn constant(grid: &[f64], c: f64) -> Result<Self, GridError> {
        Self::from_fn(grid, |_| c)
    }

    pub fn nodes(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.xs.iter().copied().zip(self.ys.iter().copied())
    }

    pub fn min_value(&self) -> f64 {
        self.ys.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max_value(&self) -> f64 {
        self.ys.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    /// x-hull of the tabulation.
    pub fn hull(&self) -> (f64, f64) {
        (self.xs[0], *self.xs.last().unwrap())
    }

    /// Evaluates at `x`: exact at nodes, linear between them, error
    /// outside the hull.
    pub fn eval(&self, x: f64) -> Result<f64, GridError> {
        let key = canonical_key(x);
        let (lo, hi) = self.hull();
        match self.xs.binary_search_by(|&nx| canonical_key(nx).cmp(&key)) {
            Ok(i) => Ok(self.ys[i]),
            Err(i) => {
                if i == 0 || i == self.xs.len() {
                    return Err(GridError::UndefinedAt { x, lo, hi });
                }
                let (x0, x1) = (self.xs[i - 1], self.xs[i]);
                let (y0, y1) = (self.ys[i - 1], self.ys[i]);
                let t = (x - x0) / (x1 - x0);
                Ok(y0 + t * (y1 - y0))
            }
        }
    }

    /// Pointwise shift by a constant.
    pub fn shifted(&self, delta: f64) -> Self {
        Self {
            xs: self.xs.clone(),
            ys: self.ys.iter().map(|y| y + delta).collect(),
        }
    }
}
