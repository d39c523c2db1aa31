//! Finite discrete measures, moments, quantities of interest, and the
//! data-alphabet distributions induced by sampling.
//!
//! A measure is a convex combination of Dirac masses: ordered support
//! points with nonnegative weights summing to one. The reduction theorems
//! for moment-constrained optimization make this the universal
//! representation here; continuous candidates enter only through
//! user-supplied discretization grids.

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::grid::{canonical_key, key_value, GridError, GridFn, Interval};

/// Slack used when checking that a probability vector sums to one.
pub const MASS_TOL: f64 = 1e-12;

/// Default cap on the data-alphabet size (number of sample multisets).
pub const DEFAULT_ALPHABET_CAP: usize = 200_000;

#[derive(Debug, Error)]
pub enum MeasureError {
    #[error("negative weight {weight} at index {index}")]
    NegativeWeight { index: usize, weight: f64 },
    #[error("support point {point} outside domain [{lo}, {hi}]")]
    PointOutsideDomain { point: f64, lo: f64, hi: f64 },
    #[error("total mass is zero, cannot normalize")]
    ZeroTotalMass,
    #[error("points/weights length mismatch: {points} vs {weights}")]
    LengthMismatch { points: usize, weights: usize },
    #[error("function undefined at a support point: {0}")]
    UndefinedAtSupport(#[from] GridError),
    #[error("data alphabet would have {needed} symbols, cap is {cap}")]
    AlphabetTooLarge { needed: usize, cap: usize },
    #[error("sample size must be positive")]
    ZeroSampleSize,
}

/// A finite convex combination of Dirac masses on a real interval.
///
/// Invariants established at construction: weights are nonnegative and sum
/// to one within `1e-12`, support points are distinct after canonical
/// rounding (duplicates merged by weight addition), sorted ascending, and
/// contained in the declared domain.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiscreteMeasure {
    support: Vec<f64>,
    weights: Vec<f64>,
    domain: Interval,
}

/// Builds a [`DiscreteMeasure`], normalizing total mass and merging
/// canonically equal support points.
pub fn make_measure(
    points: &[f64],
    weights: &[f64],
    domain: Interval,
) -> Result<DiscreteMeasure, MeasureError> {
    if points.len() != weights.len() {
        return Err(MeasureError::LengthMismatch {
            points: points.len(),
            weights: weights.len(),
        });
    }
    for (i, &w) in weights.iter().enumerate() {
        if !(w >= 0.0) {
            return Err(MeasureError::NegativeWeight { index: i, weight: w });
        }
    }
    for &p in points {
        if !domain.contains(p) {
            return Err(MeasureError::PointOutsideDomain {
                point: p,
                lo: domain.lo,
                hi: domain.hi,
            });
        }
    }
    let total: f64 = weights.iter().sum();
    if !(total > 0.0) || !total.is_finite() {
        return Err(MeasureError::ZeroTotalMass);
    }
    // Merge by canonical key, then normalize. BTreeMap gives the sorted
    // support for free.
    let mut merged: BTreeMap<i64, f64> = BTreeMap::new();
    for (&p, &w) in points.iter().zip(weights) {
        *merged.entry(canonical_key(p)).or_insert(0.0) += w;
    }
    let support: Vec<f64> = merged.keys().map(|&k| key_value(k)).collect();
    let weights: Vec<f64> = merged.values().map(|&w| w / total).collect();
    Ok(DiscreteMeasure {
        support,
        weights,
        domain,
    })
}

impl DiscreteMeasure {
    /// Convenience wrapper around [`make_measure`].
    pub fn new(points: &[f64], weights: &[f64], domain: Interval) -> Result<Self, MeasureError> {
        make_measure(points, weights, domain)
    }

    /// Unit mass at a single point.
    pub fn dirac(point: f64, domain: Interval) -> Result<Self, MeasureError> {
        make_measure(&[point], &[1.0], domain)
    }

    pub fn support(&self) -> &[f64] {
        &self.support
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn domain(&self) -> Interval {
        self.domain
    }

    pub fn len(&self) -> usize {
        self.support.len()
    }

    pub fn is_empty(&self) -> bool {
        self.support.is_empty()
    }

    pub fn atoms(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.support.iter().copied().zip(self.weights.iter().copied())
    }

    /// Total mass; one within `1e-12` by construction.
    pub fn total_mass(&self) -> f64 {
        self.weights.iter().sum()
    }

    pub fn mean(&self) -> f64 {
        self.atoms().map(|(x, w)| w * x).sum()
    }

    /// Pushforward through a tabulated map: the law of `g(X)`.
    pub fn pushforward(&self, g: &GridFn) -> Result<BTreeMap<i64, f64>, MeasureError> {
        let mut image: BTreeMap<i64, f64> = BTreeMap::new();
        for (x, w) in self.atoms() {
            let y = g.eval(x)?;
            *image.entry(canonical_key(y)).or_insert(0.0) += w;
        }
        Ok(image)
    }
}

/// Generalized moment `E_mu[g]` of a tabulated function.
pub fn moment(mu: &DiscreteMeasure, g: &GridFn) -> Result<f64, MeasureError> {
    let mut acc = 0.0;
    for (x, w) in mu.atoms() {
        acc += w * g.eval(x)?;
    }
    Ok(acc)
}

/// How a quantity of interest obtains the response function it evaluates:
/// either a fixed tabulation, or the function paired with each candidate
/// (for admissible sets with a function band).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub enum FnSource {
    Fixed(GridFn),
    Paired,
}

impl FnSource {
    fn resolve<'a>(&'a self, paired: Option<&'a GridFn>) -> Result<&'a GridFn, MeasureError> {
        match self {
            FnSource::Fixed(f) => Ok(f),
            FnSource::Paired => paired.ok_or(MeasureError::UndefinedAtSupport(
                GridError::EmptyTabulation,
            )),
        }
    }
}

/// A real-valued functional of a (function, measure) pair with a declared
/// output range.
#[derive(Clone, Serialize, Deserialize)]
pub enum QuantityOfInterest {
    /// `mu[f >= a]` with the closed upper set convention.
    TailProbability { f: FnSource, threshold: f64 },
    /// `E_mu[f]`.
    Expectation { f: FnSource },
    /// Arbitrary user map, with an explicitly declared range.
    #[serde(skip)]
    Custom {
        #[serde(skip)]
        map: Arc<dyn Fn(&DiscreteMeasure) -> f64 + Send + Sync>,
        range: (f64, f64),
    },
}

impl fmt::Debug for QuantityOfInterest {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::TailProbability { threshold, .. } => {
                write!(f, "TailProbability {{ threshold: {threshold} }}")
            }
            Self::Expectation { .. } => write!(f, "Expectation"),
            Self::Custom { range, .. } => write!(f, "Custom {{ range: {range:?} }}"),
        }
    }
}

impl QuantityOfInterest {
    pub fn tail_probability(f: GridFn, threshold: f64) -> Self {
        Self::TailProbability {
            f: FnSource::Fixed(f),
            threshold,
        }
    }

    /// Tail probability of the candidate-paired response function.
    pub fn tail_probability_paired(threshold: f64) -> Self {
        Self::TailProbability {
            f: FnSource::Paired,
            threshold,
        }
    }

    pub fn expectation(f: GridFn) -> Self {
        Self::Expectation {
            f: FnSource::Fixed(f),
        }
    }

    pub fn expectation_paired() -> Self {
        Self::Expectation { f: FnSource::Paired }
    }

    pub fn custom(
        map: impl Fn(&DiscreteMeasure) -> f64 + Send + Sync + 'static,
        range: (f64, f64),
    ) -> Self {
        Self::Custom {
            map: Arc::new(map),
            range,
        }
    }

    /// Declared output range `[lower, upper]`.
    pub fn declared_range(&self) -> (f64, f64) {
        match self {
            Self::TailProbability { .. } => (0.0, 1.0),
            Self::Expectation { f } => match f {
                FnSource::Fixed(g) => (g.min_value(), g.max_value()),
                // Paired functions are band-constrained; the band owner
                // knows the tight range, this is just a non-binding default.
                FnSource::Paired => (f64::NEG_INFINITY, f64::INFINITY),
            },
            Self::Custom { range, .. } => *range,
        }
    }

    /// Evaluates on a measure together with its paired response function
    /// (if any).
    pub fn evaluate_pair(
        &self,
        mu: &DiscreteMeasure,
        paired: Option<&GridFn>,
    ) -> Result<f64, MeasureError> {
        match self {
            Self::TailProbability { f, threshold } => {
                let f = f.resolve(paired)?;
                let mut mass = 0.0;
                for (x, w) in mu.atoms() {
                    if f.eval(x)? >= *threshold {
                        mass += w;
                    }
                }
                Ok(mass)
            }
            Self::Expectation { f } => moment(mu, f.resolve(paired)?),
            Self::Custom { map, .. } => Ok(map(mu)),
        }
    }
}

/// Evaluates a quantity of interest on a bare measure (no paired
/// function).
pub fn evaluate_qoi(phi: &QuantityOfInterest, mu: &DiscreteMeasure) -> Result<f64, MeasureError> {
    phi.evaluate_pair(mu, None)
}

/// One observable outcome: a sorted multiset of sample values, stored as
/// canonical keys. Exchangeability makes the multiset a sufficient
/// statistic for i.i.d. sampling, which is what keeps alphabets tractable.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct DataSymbol(Vec<i64>);

impl DataSymbol {
    pub fn from_values(values: &[f64]) -> Self {
        let mut keys: Vec<i64> = values.iter().map(|&v| canonical_key(v)).collect();
        keys.sort_unstable();
        Self(keys)
    }

    pub fn values(&self) -> Vec<f64> {
        self.0.iter().map(|&k| key_value(k)).collect()
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Arithmetic mean of the sample values; the plug-in estimator of a
    /// mean quantity of interest.
    pub fn sample_mean(&self) -> f64 {
        if self.0.is_empty() {
            return 0.0;
        }
        self.values().iter().sum::<f64>() / self.0.len() as f64
    }
}

impl fmt::Display for DataSymbol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{{")?;
        for (i, v) in self.values().iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{v}")?;
        }
        write!(f, "}}")
    }
}

/// Shared, ordered data alphabet. Cheap to clone; candidate distributions
/// over the same problem all point at one allocation.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Alphabet(Arc<Vec<DataSymbol>>);

impl Alphabet {
    pub fn new(symbols: Vec<DataSymbol>) -> Self {
        Self(Arc::new(symbols))
    }

    pub fn symbols(&self) -> &[DataSymbol] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn index_of(&self, s: &DataSymbol) -> Option<usize> {
        self.0.binary_search(s).ok()
    }

    pub fn same_as(&self, other: &Alphabet) -> bool {
        Arc::ptr_eq(&self.0, &other.0) || self.0 == other.0
    }
}

impl PartialEq for Alphabet {
    fn eq(&self, other: &Self) -> bool {
        self.same_as(other)
    }
}

/// A probability distribution over a data alphabet.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DataDistribution {
    alphabet: Alphabet,
    probabilities: Vec<f64>,
}

impl DataDistribution {
    pub fn new(alphabet: Alphabet, probabilities: Vec<f64>) -> Self {
        debug_assert_eq!(alphabet.len(), probabilities.len());
        debug_assert!(
            (probabilities.iter().sum::<f64>() - 1.0).abs() <= 1e-9,
            "probabilities must sum to one"
        );
        Self {
            alphabet,
            probabilities,
        }
    }

    pub fn alphabet(&self) -> &Alphabet {
        &self.alphabet
    }

    pub fn probabilities(&self) -> &[f64] {
        &self.probabilities
    }

    pub fn total_mass(&self) -> f64 {
        self.probabilities.iter().sum()
    }

    /// Re-expresses this distribution over a larger shared alphabet,
    /// filling unreachable symbols with probability zero.
    pub fn reindexed(&self, shared: &Alphabet) -> Self {
        let mut probs = vec![0.0; shared.len()];
        for (sym, &p) in self.alphabet.symbols().iter().zip(&self.probabilities) {
            if let Some(i) = shared.index_of(sym) {
                probs[i] = p;
            }
        }
        Self {
            alphabet: shared.clone(),
            probabilities: probs,
        }
    }
}

/// Number of size-`n` multisets over `s` distinct values: C(s+n-1, n),
/// saturating on overflow so cap checks stay meaningful.
fn multiset_count(s: usize, n: usize) -> usize {
    let mut count: u128 = 1;
    for i in 0..n {
        count = count.saturating_mul((s + i) as u128) / (i as u128 + 1);
        if count > usize::MAX as u128 {
            return usize::MAX;
        }
    }
    count as usize
}

fn ln_factorial(n: usize) -> f64 {
    (2..=n).map(|i| (i as f64).ln()).sum()
}

/// Distribution of the multiset of `n` i.i.d. samples from `mu`.
///
/// The alphabet consists of all size-`n` multisets over the support of
/// `mu`; the probability of a multiset with occupation counts `c_i` is the
/// multinomial coefficient times the product of atom weights.
pub fn iid_data(mu: &DiscreteMeasure, n: usize) -> Result<DataDistribution, MeasureError> {
    iid_data_capped(mu, n, DEFAULT_ALPHABET_CAP)
}

/// [`iid_data`] with an explicit alphabet-size cap.
pub fn iid_data_capped(
    mu: &DiscreteMeasure,
    n: usize,
    cap: usize,
) -> Result<DataDistribution, MeasureError> {
    if n == 0 {
        return Err(MeasureError::ZeroSampleSize);
    }
    let s = mu.len();
    let needed = multiset_count(s, n);
    if needed > cap {
        return Err(MeasureError::AlphabetTooLarge { needed, cap });
    }
    let ln_n_fact = ln_factorial(n);
    let mut symbols = Vec::with_capacity(needed);
    let mut probs = Vec::with_capacity(needed);
    // Enumerate occupation-count vectors (c_1..c_s, sum n) in an order that
    // yields symbols already sorted: counts shift mass from low-index
    // (small) support points to high-index ones lexicographically.
    let mut counts = vec![0usize; s];
    counts[0] = n;
    loop {
        let mut values = Vec::with_capacity(n);
        let mut ln_p = ln_n_fact;
        let mut zero_weight_used = false;
        for (i, &c) in counts.iter().enumerate() {
            if c == 0 {
                continue;
            }
            for _ in 0..c {
                values.push(mu.support[i]);
            }
            if mu.weights[i] == 0.0 {
                zero_weight_used = true;
            } else {
                ln_p += c as f64 * mu.weights[i].ln() - ln_factorial(c);
            }
        }
        symbols.push(DataSymbol::from_values(&values));
        probs.push(if zero_weight_used { 0.0 } else { ln_p.exp() });

        // Next occupation vector: standard composition successor.
        if counts[s - 1] == n {
            break;
        }
        let mut i = s - 2;
        while counts[i] == 0 {
            i -= 1;
        }
        counts[i] -= 1;
        let tail: usize = counts[i + 1..].iter().sum();
        for c in &mut counts[i + 1..] {
            *c = 0;
        }
        counts[i + 1] = tail + 1;
    }
    // The composition order above is not the multiset sort order; sort the
    // (symbol, prob) pairs so the alphabet is canonical.
    let mut paired: Vec<(DataSymbol, f64)> = symbols.into_iter().zip(probs).collect();
    paired.sort_by(|a, b| a.0.cmp(&b.0));
    let alphabet = Alphabet::new(paired.iter().map(|(s, _)| s.clone()).collect());
    let probabilities = paired.into_iter().map(|(_, p)| p).collect();
    Ok(DataDistribution::new(alphabet, probabilities))
}
