//! Loss functions, statistical error of estimators, worst-case error over
//! a candidate family, Bayes-averaged risk, and the bias/variance
//! decomposition.
//!
//! The statistical error of an estimator against a candidate pair is the
//! expected loss of the estimation error under that candidate's data
//! distribution. Everything is an exact finite sum over the shared data
//! alphabet; no Monte Carlo anywhere.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::game::Prior;
use crate::grid::{key_value, GridFn};
use crate::measure::{
    iid_data_capped, Alphabet, DataDistribution, DataSymbol, DiscreteMeasure, MeasureError,
    QuantityOfInterest, DEFAULT_ALPHABET_CAP,
};

#[derive(Debug, Error)]
pub enum RiskError {
    #[error("estimator is defined on {estimator} symbols, alphabet has {alphabet}")]
    AlphabetMismatch { estimator: usize, alphabet: usize },
    #[error("candidate list is empty")]
    EmptyCandidates,
    #[error("prior has {prior} weights for {candidates} candidates")]
    LengthMismatch { prior: usize, candidates: usize },
    #[error("threshold loss requires gamma > 0, got {0}")]
    NonPositiveGamma(f64),
    #[error("randomized estimator row {row} sums to {sum}, expected 1")]
    BadKernelRow { row: usize, sum: f64 },
    #[error(transparent)]
    Measure(#[from] MeasureError),
}

/// Loss applied to the estimation error `theta(D) - Phi`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum LossFunction {
    /// `V(x) = x^2`: mean squared error semantics.
    Squared,
    /// `V(x) = 1[|x| >= gamma]`: probability of missing by gamma or more.
    /// The boundary counts as an error (closed set).
    Threshold { gamma: f64 },
}

impl LossFunction {
    pub fn threshold(gamma: f64) -> Result<Self, RiskError> {
        if !(gamma > 0.0) {
            return Err(RiskError::NonPositiveGamma(gamma));
        }
        Ok(Self::Threshold { gamma })
    }

    pub fn apply(&self, x: f64) -> f64 {
        match self {
            Self::Squared => x * x,
            Self::Threshold { gamma } => {
                if x.abs() >= *gamma {
                    1.0
                } else {
                    0.0
                }
            }
        }
    }

    pub fn is_convex(&self) -> bool {
        matches!(self, Self::Squared)
    }
}

/// A rule turning an observed data symbol into a real estimate:
/// one value per alphabet symbol, or a row-stochastic kernel over a
/// finite decision grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Estimator {
    Deterministic(Vec<f64>),
    Randomized {
        /// `kernel[d][j]` = probability of deciding `decisions[j]` on
        /// symbol `d`; rows sum to one.
        kernel: Vec<Vec<f64>>,
        decisions: Vec<f64>,
    },
}

impl Estimator {
    pub fn constant(value: f64, alphabet_len: usize) -> Self {
        Self::Deterministic(vec![value; alphabet_len])
    }

    pub fn len(&self) -> usize {
        match self {
            Self::Deterministic(v) => v.len(),
            Self::Randomized { kernel, .. } => kernel.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn is_deterministic(&self) -> bool {
        matches!(self, Self::Deterministic(_))
    }

    /// Validates kernel stochasticity.
    pub fn validate(&self) -> Result<(), RiskError> {
        if let Self::Randomized { kernel, decisions } = self {
            for (row, probs) in kernel.iter().enumerate() {
                if probs.len() != decisions.len() {
                    return Err(RiskError::BadKernelRow {
                        row,
                        sum: f64::NAN,
                    });
                }
                let sum: f64 = probs.iter().sum();
                if (sum - 1.0).abs() > 1e-12 || probs.iter().any(|&p| p < 0.0) {
                    return Err(RiskError::BadKernelRow { row, sum });
                }
            }
        }
        Ok(())
    }

    /// Expected loss of the decision on symbol `d` against target `phi`.
    fn expected_loss_at(&self, d: usize, phi: f64, loss: &LossFunction) -> f64 {
        match self {
            Self::Deterministic(v) => loss.apply(v[d] - phi),
            Self::Randomized { kernel, decisions } => kernel[d]
                .iter()
                .zip(decisions)
                .map(|(&p, &x)| p * loss.apply(x - phi))
                .sum(),
        }
    }

    /// Mean decision on symbol `d`.
    fn mean_at(&self, d: usize) -> f64 {
        match self {
            Self::Deterministic(v) => v[d],
            Self::Randomized { kernel, decisions } => kernel[d]
                .iter()
                .zip(decisions)
                .map(|(&p, &x)| p * x)
                .sum(),
        }
    }

    /// Mean square of the decision on symbol `d`.
    fn mean_sq_at(&self, d: usize) -> f64 {
        match self {
            Self::Deterministic(v) => v[d] * v[d],
            Self::Randomized { kernel, decisions } => kernel[d]
                .iter()
                .zip(decisions)
                .map(|(&p, &x)| p * x * x)
                .sum(),
        }
    }
}

/// Rule sending a candidate measure to the distribution of the observed
/// data: the multiset of `n` i.i.d. samples, either of the raw variable or
/// of a coarse observation `g(X)`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub enum DataMap {
    Iid { n: usize },
    Coarse { g: GridFn, n: usize },
}

impl DataMap {
    pub fn iid(n: usize) -> Self {
        Self::Iid { n }
    }

    pub fn coarse(g: GridFn, n: usize) -> Self {
        Self::Coarse { g, n }
    }

    /// Data distribution of a single candidate (over its own alphabet).
    fn apply(&self, mu: &DiscreteMeasure, cap: usize) -> Result<DataDistribution, MeasureError> {
        match self {
            Self::Iid { n } => iid_data_capped(mu, *n, cap),
            Self::Coarse { g, n } => {
                let image = mu.pushforward(g)?;
                let points: Vec<f64> = image.keys().map(|&k| key_value(k)).collect();
                let weights: Vec<f64> = image.values().copied().collect();
                let lo = points.iter().copied().fold(f64::INFINITY, f64::min);
                let hi = points.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                let domain = crate::grid::Interval::new(lo, hi)
                    .map_err(|_| MeasureError::ZeroTotalMass)?;
                let observed = crate::measure::make_measure(&points, &weights, domain)?;
                iid_data_capped(&observed, *n, cap)
            }
        }
    }
}

/// One admissible hypothesis: a measure (optionally with a paired response
/// function), its cached quantity-of-interest value, and its data
/// distribution over the problem's shared alphabet.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Candidate {
    pub measure: DiscreteMeasure,
    pub function: Option<GridFn>,
    pub phi_value: f64,
    pub data: DataDistribution,
}

impl Candidate {
    pub fn likelihood(&self, d: usize) -> f64 {
        self.data.probabilities()[d]
    }
}

/// A finite hypothesis class before a data map is applied: the inputs from
/// which [`Candidate`]s are built for each experiment under comparison.
#[derive(Debug, Clone)]
pub struct CandidateFamily {
    pub members: Vec<(DiscreteMeasure, Option<GridFn>)>,
    pub phi: QuantityOfInterest,
    pub alphabet_cap: usize,
}

impl CandidateFamily {
    pub fn new(members: Vec<(DiscreteMeasure, Option<GridFn>)>, phi: QuantityOfInterest) -> Self {
        Self {
            members,
            phi,
            alphabet_cap: DEFAULT_ALPHABET_CAP,
        }
    }

    /// Bernoulli-style family: for each `p`, the two-point measure
    /// `{0: 1-p, 1: p}` with `Phi = p` (the mean).
    pub fn bernoulli_grid(ps: &[f64]) -> Result<Self, MeasureError> {
        let domain = crate::grid::Interval::unit();
        let id = GridFn::identity(&[0.0, 1.0]).map_err(MeasureError::from)?;
        let mut members = Vec::with_capacity(ps.len());
        for &p in ps {
            let mu = crate::measure::make_measure(&[0.0, 1.0], &[1.0 - p, p], domain)?;
            members.push((mu, None));
        }
        Ok(Self::new(members, QuantityOfInterest::expectation(id)))
    }

    /// Instantiates the family under a data map, building the shared
    /// alphabet (union over members) and caching the quantity of interest.
    pub fn with_data_map(&self, map: &DataMap) -> Result<Vec<Candidate>, RiskError> {
        if self.members.is_empty() {
            return Err(RiskError::EmptyCandidates);
        }
        let mut own: Vec<DataDistribution> = Vec::with_capacity(self.members.len());
        for (mu, _) in &self.members {
            own.push(map.apply(mu, self.alphabet_cap)?);
        }
        let mut symbols: Vec<DataSymbol> = own
            .iter()
            .flat_map(|d| d.alphabet().symbols().iter().cloned())
            .collect();
        symbols.sort();
        symbols.dedup();
        let shared = Alphabet::new(symbols);
        let mut out = Vec::with_capacity(self.members.len());
        for ((mu, f), dist) in self.members.iter().zip(own) {
            let phi_value = self.phi.evaluate_pair(mu, f.as_ref())?;
            out.push(Candidate {
                measure: mu.clone(),
                function: f.clone(),
                phi_value,
                data: dist.reindexed(&shared),
            });
        }
        Ok(out)
    }

    /// Range `[min Phi, max Phi]` over the members.
    pub fn phi_range(&self) -> Result<(f64, f64), RiskError> {
        if self.members.is_empty() {
            return Err(RiskError::EmptyCandidates);
        }
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for (mu, f) in &self.members {
            let v = self.phi.evaluate_pair(mu, f.as_ref())?;
            lo = lo.min(v);
            hi = hi.max(v);
        }
        Ok((lo, hi))
    }
}

/// Shared alphabet of a candidate list (all candidates of one problem
/// carry the same one).
pub fn shared_alphabet(candidates: &[Candidate]) -> Result<&Alphabet, RiskError> {
    let first = candidates.first().ok_or(RiskError::EmptyCandidates)?;
    Ok(first.data.alphabet())
}

fn check_alphabet(theta: &Estimator, cand: &Candidate) -> Result<(), RiskError> {
    if theta.len() != cand.data.alphabet().len() {
        return Err(RiskError::AlphabetMismatch {
            estimator: theta.len(),
            alphabet: cand.data.alphabet().len(),
        });
    }
    Ok(())
}

/// Indices of the alphabet sorted by descending probability under `cand`;
/// risks are summed in this order for reproducible round-off.
fn descending_order(probs: &[f64]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..probs.len()).collect();
    idx.sort_by(|&a, &b| probs[b].partial_cmp(&probs[a]).unwrap().then(a.cmp(&b)));
    idx
}

/// Statistical error `E_{D ~ D(f,mu)}[ V(theta(D) - Phi(f,mu)) ]`.
pub fn statistical_error(
    theta: &Estimator,
    cand: &Candidate,
    loss: &LossFunction,
) -> Result<f64, RiskError> {
    check_alphabet(theta, cand)?;
    let probs = cand.data.probabilities();
    let mut acc = 0.0;
    for d in descending_order(probs) {
        if probs[d] == 0.0 {
            continue;
        }
        acc += probs[d] * theta.expected_loss_at(d, cand.phi_value, loss);
    }
    Ok(acc)
}

/// Least upper bound of the statistical error over a candidate family,
/// with the attaining index (ties broken toward the lowest index).
pub fn worst_case_error(
    theta: &Estimator,
    candidates: &[Candidate],
    loss: &LossFunction,
) -> Result<(f64, usize), RiskError> {
    if candidates.is_empty() {
        return Err(RiskError::EmptyCandidates);
    }
    let mut best = f64::NEG_INFINITY;
    let mut arg = 0;
    for (k, cand) in candidates.iter().enumerate() {
        let e = statistical_error(theta, cand, loss)?;
        if e > best {
            best = e;
            arg = k;
        }
    }
    Ok((best, arg))
}

/// Variance, bias and mean squared error of an estimator against one
/// candidate (squared-loss semantics). `mse = variance + bias^2` exactly.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct BiasVariance {
    pub variance: f64,
    pub bias: f64,
    pub mse: f64,
}

pub fn bias_variance(theta: &Estimator, cand: &Candidate) -> Result<BiasVariance, RiskError> {
    check_alphabet(theta, cand)?;
    let probs = cand.data.probabilities();
    let order = descending_order(probs);
    let mut mean = 0.0;
    let mut mean_sq = 0.0;
    let mut mse = 0.0;
    for &d in &order {
        if probs[d] == 0.0 {
            continue;
        }
        mean += probs[d] * theta.mean_at(d);
        mean_sq += probs[d] * theta.mean_sq_at(d);
        mse += probs[d] * theta.expected_loss_at(d, cand.phi_value, &LossFunction::Squared);
    }
    let variance = mean_sq - mean * mean;
    let bias = mean - cand.phi_value;
    Ok(BiasVariance {
        variance,
        bias,
        mse,
    })
}

/// Risk averaged over a prior on the candidate list: affine in the prior,
/// so its simplex maximum sits at a vertex (the worst single candidate).
pub fn averaged_risk(
    theta: &Estimator,
    prior: &Prior,
    candidates: &[Candidate],
    loss: &LossFunction,
) -> Result<f64, RiskError> {
    if prior.len() != candidates.len() {
        return Err(RiskError::LengthMismatch {
            prior: prior.len(),
            candidates: candidates.len(),
        });
    }
    let mut acc = 0.0;
    for (w, cand) in prior.weights().iter().zip(candidates) {
        if *w == 0.0 {
            continue;
        }
        acc += w * statistical_error(theta, cand, loss)?;
    }
    Ok(acc)
}
