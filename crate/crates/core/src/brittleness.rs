//! Finite constructions of the prior-data joint `pi (.) D`, its data
//! marginal `pi . D`, the family of conditional-expectation versions, and
//! the numerical verification of the brittleness sandwich.
//!
//! The Bayes estimator against a prior is only determined up to data
//! symbols of `pi . D`-measure zero: on those null atoms any value in the
//! range of the quantity of interest yields a legitimate version, and all
//! versions share the same risk under `pi`. Under a second prior whose
//! data marginal puts mass on the null atoms, the versions disagree: the
//! spread of their risks, normalized by the squared value range times the
//! maximal null mass, always lands in `[1/4, 1]`.

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::game::{bayes_estimator, GameError, Prior};
use crate::measure::{Alphabet, DataDistribution};
use crate::risk::{averaged_risk, Candidate, Estimator, LossFunction, RiskError};

/// Data-marginal mass below which a symbol counts as a structural null
/// atom (instances are built with exact zeros; the slack only absorbs
/// round-off).
pub const NULL_ATOM_TOL: f64 = 1e-15;

#[derive(Debug, Error)]
pub enum BrittleError {
    #[error("prior has {prior} weights for {candidates} candidates")]
    LengthMismatch { prior: usize, candidates: usize },
    #[error("pi-dagger puts no mass on pi-null data: gap is exactly zero")]
    AbsolutelyContinuous,
    #[error("pi-dagger data marginal is not orthogonal to pi's (null mass {null_mass})")]
    NotOrthogonal { null_mass: f64 },
    #[error("quantity of interest is constant over the candidates; the ratio is undefined")]
    DegenerateRange,
    #[error("version values must lie in [{lo}, {hi}], got {value}")]
    ValueOutsideRange { value: f64, lo: f64, hi: f64 },
    #[error("expected {expected} null-atom values, got {got}")]
    WrongVersionLength { expected: usize, got: usize },
    #[error(transparent)]
    Game(#[from] GameError),
    #[error(transparent)]
    Risk(#[from] RiskError),
}

/// The joint distribution of (candidate, data symbol) under a prior:
/// `matrix[k][d] = pi_k * L_k(d)`. Row sums recover the prior, column
/// sums the data marginal.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct JointTable {
    pub matrix: Vec<Vec<f64>>,
    pub prior: Prior,
    alphabet: Alphabet,
}

impl JointTable {
    pub fn alphabet(&self) -> &Alphabet {
        &self.alphabet
    }

    pub fn candidate_marginal(&self) -> Vec<f64> {
        self.matrix.iter().map(|row| row.iter().sum()).collect()
    }

    pub fn data_marginal(&self) -> Vec<f64> {
        let d = self.alphabet.len();
        let mut out = vec![0.0; d];
        for row in &self.matrix {
            for (o, v) in out.iter_mut().zip(row) {
                *o += v;
            }
        }
        out
    }

    pub fn total_mass(&self) -> f64 {
        self.matrix.iter().flat_map(|r| r.iter()).sum()
    }
}

fn check_lengths(prior: &Prior, candidates: &[Candidate]) -> Result<(), BrittleError> {
    if candidates.is_empty() || prior.len() != candidates.len() {
        return Err(BrittleError::LengthMismatch {
            prior: prior.len(),
            candidates: candidates.len(),
        });
    }
    Ok(())
}

/// Builds `pi (.) D` and its data marginal `pi . D` by exact finite
/// products and sums.
pub fn joint_and_marginals(
    prior: &Prior,
    candidates: &[Candidate],
) -> Result<(JointTable, DataDistribution), BrittleError> {
    check_lengths(prior, candidates)?;
    let alphabet = candidates[0].data.alphabet().clone();
    let matrix: Vec<Vec<f64>> = prior
        .weights()
        .iter()
        .zip(candidates)
        .map(|(w, c)| c.data.probabilities().iter().map(|&p| w * p).collect())
        .collect();
    let table = JointTable {
        matrix,
        prior: prior.clone(),
        alphabet: alphabet.clone(),
    };
    let marginal = DataDistribution::new(alphabet, table.data_marginal());
    Ok((table, marginal))
}

/// The convex family of Bayes-estimator versions for a prior: all members
/// agree with the canonical posterior mean off the null atoms and take
/// arbitrary values in the quantity-of-interest range on them.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct VersionFamily {
    pub base: Estimator,
    /// Alphabet indices with `pi . D` mass at most [`NULL_ATOM_TOL`].
    pub null_atoms: Vec<usize>,
    /// `[L, U]`: value range of the quantity of interest over the
    /// candidate list.
    pub free_range: (f64, f64),
}

impl VersionFamily {
    pub fn new(prior: &Prior, candidates: &[Candidate]) -> Result<Self, BrittleError> {
        check_lengths(prior, candidates)?;
        let base = bayes_estimator(prior, candidates, &LossFunction::Squared)?;
        let (_, marginal) = joint_and_marginals(prior, candidates)?;
        let null_atoms: Vec<usize> = marginal
            .probabilities()
            .iter()
            .enumerate()
            .filter(|(_, &m)| m <= NULL_ATOM_TOL)
            .map(|(d, _)| d)
            .collect();
        let free_range = phi_range(candidates);
        Ok(Self {
            base,
            null_atoms,
            free_range,
        })
    }

    /// A version with the given values on the null atoms (one per atom,
    /// each inside the free range).
    pub fn version_with(&self, null_values: &[f64]) -> Result<Estimator, BrittleError> {
        if null_values.len() != self.null_atoms.len() {
            return Err(BrittleError::WrongVersionLength {
                expected: self.null_atoms.len(),
                got: null_values.len(),
            });
        }
        let (lo, hi) = self.free_range;
        let mut values = match &self.base {
            Estimator::Deterministic(v) => v.clone(),
            Estimator::Randomized { .. } => unreachable!("posterior mean is deterministic"),
        };
        for (&d, &v) in self.null_atoms.iter().zip(null_values) {
            if v < lo - 1e-12 || v > hi + 1e-12 {
                return Err(BrittleError::ValueOutsideRange { value: v, lo, hi });
            }
            values[d] = v;
        }
        Ok(Estimator::Deterministic(values))
    }

    /// A uniformly random version (for the risk-equality property tests).
    pub fn random_version(&self, rng: &mut impl Rng) -> Estimator {
        let (lo, hi) = self.free_range;
        let vals: Vec<f64> = self
            .null_atoms
            .iter()
            .map(|_| lo + rng.gen::<f64>() * (hi - lo))
            .collect();
        self.version_with(&vals).expect("in-range by construction")
    }
}

fn phi_range(candidates: &[Candidate]) -> (f64, f64) {
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for c in candidates {
        lo = lo.min(c.phi_value);
        hi = hi.max(c.phi_value);
    }
    (lo, hi)
}

/// Per-null-atom witness data for the version gap.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AtomWitness {
    /// Alphabet index of the null atom.
    pub atom: usize,
    /// `pi-dagger . D` mass on the atom.
    pub mass: f64,
    /// Conditional mean of the quantity of interest on the atom under
    /// `pi-dagger (.) D`.
    pub gamma: f64,
    /// Worst version value (far endpoint of the range).
    pub y: f64,
    /// Best version value (the conditional mean itself).
    pub z: f64,
}

/// The exact version-gap computation.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct VersionGap {
    /// `sup over version pairs of Er(theta2, pi-dagger) - Er(theta1, pi-dagger)`.
    pub sup_gap: f64,
    /// Total `pi-dagger . D` mass on the union of null atoms (the maximal
    /// null set).
    pub null_mass: f64,
    /// `(U - L)^2 * null_mass`.
    pub denominator: f64,
    /// `sup_gap / denominator`; inside `[1/4, 1]` whenever defined.
    pub ratio: f64,
    pub free_range: (f64, f64),
    pub witnesses: Vec<AtomWitness>,
    pub family: VersionFamily,
}

/// Computes the sup over version pairs of the risk discrepancy under
/// `pi_dagger`, atom by atom: on a null atom with conditional mean
/// `gamma_b`, the best version takes `gamma_b` and the worst takes the
/// far endpoint of the range.
pub fn version_gap(
    pi: &Prior,
    pi_dagger: &Prior,
    candidates: &[Candidate],
) -> Result<VersionGap, BrittleError> {
    check_lengths(pi, candidates)?;
    check_lengths(pi_dagger, candidates)?;
    let family = VersionFamily::new(pi, candidates)?;
    let (lo, hi) = family.free_range;
    if hi - lo <= 0.0 {
        return Err(BrittleError::DegenerateRange);
    }

    let mut witnesses = Vec::new();
    let mut sup_gap = 0.0;
    let mut null_mass = 0.0;
    for &d in &family.null_atoms {
        let mut mass = 0.0;
        let mut weighted_phi = 0.0;
        for (w, c) in pi_dagger.weights().iter().zip(candidates) {
            let j = w * c.likelihood(d);
            mass += j;
            weighted_phi += j * c.phi_value;
        }
        if mass <= 0.0 {
            continue;
        }
        null_mass += mass;
        let gamma = weighted_phi / mass;
        let up = (hi - gamma) * (hi - gamma);
        let down = (gamma - lo) * (gamma - lo);
        let y = if up >= down { hi } else { lo };
        sup_gap += mass * up.max(down);
        witnesses.push(AtomWitness {
            atom: d,
            mass,
            gamma,
            y,
            z: gamma,
        });
    }
    if null_mass <= NULL_ATOM_TOL {
        return Err(BrittleError::AbsolutelyContinuous);
    }
    let denominator = (hi - lo) * (hi - lo) * null_mass;
    let ratio = sup_gap / denominator;
    debug_assert!(
        (0.25 - 1e-9..=1.0 + 1e-9).contains(&ratio),
        "sandwich ratio {ratio} escaped [1/4, 1]"
    );
    Ok(VersionGap {
        sup_gap,
        null_mass,
        denominator,
        ratio,
        free_range: (lo, hi),
        witnesses,
        family,
    })
}

/// Sandwich verification report: the ratio with both bounds checked, plus
/// witness versions whose directly evaluated risks reproduce the gap.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SandwichReport {
    pub ratio: f64,
    pub lower_ok: bool,
    pub upper_ok: bool,
    pub sup_gap: f64,
    pub null_mass: f64,
    /// Risk-maximizing version under `pi_dagger`.
    pub theta_worst: Estimator,
    /// Risk-minimizing version under `pi_dagger`.
    pub theta_best: Estimator,
    pub risk_worst: f64,
    pub risk_best: f64,
    /// `|(risk_worst - risk_best) - sup_gap|`: the analytic per-atom
    /// formula against the direct risk evaluation.
    pub reproduction_error: f64,
    pub gap: VersionGap,
}

pub fn sandwich_check(
    pi: &Prior,
    pi_dagger: &Prior,
    candidates: &[Candidate],
) -> Result<SandwichReport, BrittleError> {
    let gap = version_gap(pi, pi_dagger, candidates)?;
    // Assemble the witness versions: values per null atom in family order.
    let mut worst_vals = Vec::with_capacity(gap.family.null_atoms.len());
    let mut best_vals = Vec::with_capacity(gap.family.null_atoms.len());
    for &d in &gap.family.null_atoms {
        match gap.witnesses.iter().find(|w| w.atom == d) {
            Some(w) => {
                worst_vals.push(w.y);
                best_vals.push(w.z);
            }
            None => {
                // No pi-dagger mass here: the value is irrelevant, keep base.
                let base = match &gap.family.base {
                    Estimator::Deterministic(v) => v[d],
                    Estimator::Randomized { .. } => unreachable!(),
                };
                let clamped = base.clamp(gap.free_range.0, gap.free_range.1);
                worst_vals.push(clamped);
                best_vals.push(clamped);
            }
        }
    }
    let theta_worst = gap.family.version_with(&worst_vals)?;
    let theta_best = gap.family.version_with(&best_vals)?;
    let loss = LossFunction::Squared;
    let risk_worst = averaged_risk(&theta_worst, pi_dagger, candidates, &loss)?;
    let risk_best = averaged_risk(&theta_best, pi_dagger, candidates, &loss)?;
    let reproduction_error = ((risk_worst - risk_best) - gap.sup_gap).abs();
    Ok(SandwichReport {
        ratio: gap.ratio,
        lower_ok: gap.ratio >= 0.25 - 1e-9,
        upper_ok: gap.ratio <= 1.0 + 1e-9,
        sup_gap: gap.sup_gap,
        null_mass: gap.null_mass,
        theta_worst,
        theta_best,
        risk_worst,
        risk_best,
        reproduction_error,
        gap,
    })
}

/// Comparison against the no-data midpoint estimator for mutually
/// singular data marginals: the version gap dominates the midpoint's
/// statistical error under `pi_dagger`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MidpointComparison {
    pub sup_gap: f64,
    pub midpoint_risk: f64,
    pub null_mass: f64,
}

pub fn midpoint_comparison(
    pi: &Prior,
    pi_dagger: &Prior,
    candidates: &[Candidate],
) -> Result<MidpointComparison, BrittleError> {
    let gap = version_gap(pi, pi_dagger, candidates)?;
    if gap.null_mass < 1.0 - 1e-12 {
        return Err(BrittleError::NotOrthogonal {
            null_mass: gap.null_mass,
        });
    }
    let (lo, hi) = gap.free_range;
    let alphabet_len = candidates[0].data.alphabet().len();
    let midpoint = Estimator::constant(0.5 * (lo + hi), alphabet_len);
    let midpoint_risk =
        averaged_risk(&midpoint, pi_dagger, candidates, &LossFunction::Squared)?;
    debug_assert!(gap.sup_gap >= midpoint_risk - 1e-12);
    Ok(MidpointComparison {
        sup_gap: gap.sup_gap,
        midpoint_risk,
        null_mass: gap.null_mass,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{GridFn, Interval};
    use crate::measure::{make_measure, QuantityOfInterest};
    use crate::risk::{CandidateFamily, DataMap};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    /// Demo A: domain {0,1,2}, Phi = E[X]/2, coarse map Y = 1[X = 1].
    /// pi sits on the Dirac at 1; pi-dagger spreads half its mass onto
    /// the Diracs at 0 and 2, which are invisible under pi.
    fn demo_a() -> (Prior, Prior, Vec<Candidate>) {
        let domain = Interval::new(0.0, 2.0).unwrap();
        let grid = [0.0, 1.0, 2.0];
        let half = GridFn::from_fn(&grid, |x| x / 2.0).unwrap();
        let indicator = GridFn::from_pairs(&[(0.0, 0.0), (1.0, 1.0), (2.0, 0.0)]).unwrap();
        let members = vec![
            (make_measure(&[1.0], &[1.0], domain).unwrap(), None),
            (make_measure(&[0.0], &[1.0], domain).unwrap(), None),
            (make_measure(&[2.0], &[1.0], domain).unwrap(), None),
        ];
        let family = CandidateFamily::new(members, QuantityOfInterest::expectation(half));
        let candidates = family.with_data_map(&DataMap::coarse(indicator, 1)).unwrap();
        let pi = Prior::new(&[1.0, 0.0, 0.0]).unwrap();
        let pi_dagger = Prior::new(&[0.5, 0.25, 0.25]).unwrap();
        (pi, pi_dagger, candidates)
    }

    /// Demo B: pi on the uniform {0,1} candidate, pi-dagger adds mass 0.5
    /// on the Dirac at 2; Phi = P(X >= 1); identity observations.
    fn demo_b() -> (Prior, Prior, Vec<Candidate>) {
        let domain = Interval::new(0.0, 2.0).unwrap();
        let id = GridFn::identity(&[0.0, 1.0, 2.0]).unwrap();
        let members = vec![
            (
                make_measure(&[0.0, 1.0], &[0.5, 0.5], domain).unwrap(),
                None,
            ),
            (make_measure(&[2.0], &[1.0], domain).unwrap(), None),
        ];
        let family =
            CandidateFamily::new(members, QuantityOfInterest::tail_probability(id, 1.0));
        let candidates = family.with_data_map(&DataMap::iid(1)).unwrap();
        let pi = Prior::new(&[1.0, 0.0]).unwrap();
        let pi_dagger = Prior::new(&[0.5, 0.5]).unwrap();
        (pi, pi_dagger, candidates)
    }

    #[test]
    fn joint_of_point_mass_prior_is_the_candidate_row() {
        let (_, _, cands) = demo_a();
        let pi = Prior::point_mass(0, 3).unwrap();
        let (table, marginal) = joint_and_marginals(&pi, &cands).unwrap();
        assert!((table.total_mass() - 1.0).abs() < 1e-12);
        for (a, b) in table.matrix[0].iter().zip(cands[0].data.probabilities()) {
            assert!((a - b).abs() < 1e-15);
        }
        assert!((marginal.total_mass() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn joint_marginals_are_consistent() {
        let (_, pi_dagger, cands) = demo_a();
        let (table, marginal) = joint_and_marginals(&pi_dagger, &cands).unwrap();
        for (a, b) in table.candidate_marginal().iter().zip(pi_dagger.weights()) {
            assert!((a - b).abs() < 1e-12);
        }
        let col = table.data_marginal();
        for (a, b) in col.iter().zip(marginal.probabilities()) {
            assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn demo_a_marginal_mass_on_null_block() {
        let (pi, pi_dagger, cands) = demo_a();
        let (_, pi_marginal) = joint_and_marginals(&pi, &cands).unwrap();
        let (_, dag_marginal) = joint_and_marginals(&pi_dagger, &cands).unwrap();
        // Alphabet sorted: {0} before {1}; pi never emits 0.
        assert!(pi_marginal.probabilities()[0].abs() <= NULL_ATOM_TOL);
        assert!((dag_marginal.probabilities()[0] - 0.5).abs() < 1e-12);
    }

    #[test]
    fn demo_a_attains_the_lower_bound() {
        let (pi, pi_dagger, cands) = demo_a();
        let gap = version_gap(&pi, &pi_dagger, &cands).unwrap();
        assert!((gap.null_mass - 0.5).abs() < 1e-12);
        assert!((gap.sup_gap - 0.125).abs() < 1e-12);
        assert!((gap.ratio - 0.25).abs() < 1e-9);
        let w = &gap.witnesses[0];
        assert!((w.gamma - 0.5).abs() < 1e-12);
    }

    #[test]
    fn demo_b_attains_the_upper_bound() {
        let (pi, pi_dagger, cands) = demo_b();
        let gap = version_gap(&pi, &pi_dagger, &cands).unwrap();
        assert!((gap.ratio - 1.0).abs() < 1e-9, "ratio = {}", gap.ratio);
        assert!((gap.sup_gap - 0.125).abs() < 1e-12);
    }

    #[test]
    fn absolutely_continuous_prior_has_no_gap() {
        let (pi, _, cands) = demo_a();
        // Same support as pi: no null mass.
        assert!(matches!(
            version_gap(&pi, &pi, &cands),
            Err(BrittleError::AbsolutelyContinuous)
        ));
    }

    #[test]
    fn sandwich_reports_reproduce_the_gap() {
        for (pi, pi_dagger, cands) in [demo_a(), demo_b()] {
            let report = sandwich_check(&pi, &pi_dagger, &cands).unwrap();
            assert!(report.lower_ok && report.upper_ok);
            assert!(
                report.reproduction_error <= 1e-12,
                "direct risks disagree with the per-atom formula by {}",
                report.reproduction_error
            );
        }
    }

    #[test]
    fn versions_share_risk_under_pi() {
        let (pi, _, cands) = demo_a();
        let family = VersionFamily::new(&pi, &cands).unwrap();
        let base_risk =
            averaged_risk(&family.base, &pi, &cands, &LossFunction::Squared).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..100 {
            let theta = family.random_version(&mut rng);
            let r = averaged_risk(&theta, &pi, &cands, &LossFunction::Squared).unwrap();
            assert!((r - base_risk).abs() <= 1e-12);
        }
    }

    #[test]
    fn midpoint_comparison_on_orthogonal_demo() {
        let (pi, _, cands) = demo_b();
        // Restrict pi-dagger fully to the null block (the Dirac at 2).
        let orthogonal = Prior::new(&[0.0, 1.0]).unwrap();
        let cmp = midpoint_comparison(&pi, &orthogonal, &cands).unwrap();
        assert!(cmp.sup_gap >= cmp.midpoint_risk - 1e-12);
        assert!((cmp.null_mass - 1.0).abs() < 1e-12);
    }

    #[test]
    fn symmetric_null_block_attains_equality() {
        // The null block carries the extreme values {L, U} = {0, 2} with
        // equal mass: the gap and the midpoint risk both equal
        // (U - L)^2 / 4 = 1.
        let domain = Interval::new(0.0, 2.0).unwrap();
        let grid = [0.0, 1.0, 2.0];
        let id = GridFn::identity(&grid).unwrap();
        // Observation collapses {0, 2} to one symbol, {1} to another.
        let g = GridFn::from_pairs(&[(0.0, 9.0), (1.0, 1.0), (2.0, 9.0)]).unwrap();
        let members = vec![
            (make_measure(&[1.0], &[1.0], domain).unwrap(), None),
            (make_measure(&[0.0], &[1.0], domain).unwrap(), None),
            (make_measure(&[2.0], &[1.0], domain).unwrap(), None),
        ];
        let family = CandidateFamily::new(members, QuantityOfInterest::expectation(id));
        let cands = family.with_data_map(&DataMap::coarse(g, 1)).unwrap();
        let pi = Prior::new(&[1.0, 0.0, 0.0]).unwrap();
        let pi_dagger = Prior::new(&[0.0, 0.5, 0.5]).unwrap();
        let cmp = midpoint_comparison(&pi, &pi_dagger, &cands).unwrap();
        assert!((cmp.sup_gap - 1.0).abs() < 1e-12);
        assert!((cmp.midpoint_risk - 1.0).abs() < 1e-12);
        let gap = version_gap(&pi, &pi_dagger, &cands).unwrap();
        assert!((gap.ratio - 0.25).abs() < 1e-9);
    }

    #[test]
    fn single_null_candidate_is_strict() {
        let (pi, _, cands) = demo_b();
        let orthogonal = Prior::new(&[0.0, 1.0]).unwrap();
        let cmp = midpoint_comparison(&pi, &orthogonal, &cands).unwrap();
        // gamma_b sits at the endpoint: gap (U-L)^2, midpoint (U-L)^2/4.
        assert!(cmp.sup_gap > cmp.midpoint_risk + 1e-3);
    }

    #[test]
    fn non_orthogonal_rejected() {
        let (pi, pi_dagger, cands) = demo_a();
        assert!(matches!(
            midpoint_comparison(&pi, &pi_dagger, &cands),
            Err(BrittleError::NotOrthogonal { .. })
        ));
    }
}
