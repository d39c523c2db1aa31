//! Declarative admissible sets: a domain interval, generalized moment
//! constraints, and an optional uniform band around a nominal response
//! function. Provides the reduced finite-dimensional Dirac parametrization
//! used by the bound solver and a deterministic lattice enumeration used
//! to build finite candidate families for the decision-game modules.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::grid::{GridFn, Interval};
use crate::measure::{make_measure, moment, DiscreteMeasure, MeasureError};
use crate::numeric::{solve_lp, LpOutcome};

/// Absolute feasibility tolerance: separates solver round-off from a
/// genuine constraint violation.
pub const FEASIBILITY_TOL: f64 = 1e-9;

#[derive(Debug, Error)]
pub enum AdmissibleError {
    #[error("grid point {0} outside the domain")]
    GridOutsideDomain(f64),
    #[error("grid is empty")]
    EmptyGrid,
    #[error("constraint bound must be finite, got {0}")]
    NonFiniteBound(f64),
    #[error("band half-width must be nonnegative, got {0}")]
    NegativeHalfWidth(f64),
    #[error("feasibility probe found no admissible measure (best violation {best_violation:.3e})")]
    InfeasibleSet { best_violation: f64 },
    #[error("candidate requires a paired function (band present)")]
    MissingFunction,
    #[error("lattice would enumerate {needed} candidates, cap is {cap}")]
    CandidateCapExceeded { needed: usize, cap: usize },
    #[error("lattice enumeration found no feasible candidate")]
    EmptyEnumeration,
    #[error("lattice step must be positive, got {0}")]
    NonPositiveStep(f64),
    #[error(transparent)]
    Measure(#[from] MeasureError),
}

/// Direction of a generalized moment constraint `E_mu[g] <rel> bound`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Relation {
    #[serde(rename = "<=")]
    Le,
    #[serde(rename = ">=")]
    Ge,
    #[serde(rename = "=")]
    Eq,
}

/// A single generalized moment constraint.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MomentConstraint {
    pub g: GridFn,
    pub relation: Relation,
    pub bound: f64,
}

impl MomentConstraint {
    pub fn new(g: GridFn, relation: Relation, bound: f64) -> Result<Self, AdmissibleError> {
        if !bound.is_finite() {
            return Err(AdmissibleError::NonFiniteBound(bound));
        }
        Ok(Self { g, relation, bound })
    }

    /// Violation of the constraint at moment value `v` (zero when
    /// satisfied). Equality counts as two inequalities.
    pub fn violation(&self, v: f64) -> f64 {
        match self.relation {
            Relation::Le => (v - self.bound).max(0.0),
            Relation::Ge => (self.bound - v).max(0.0),
            Relation::Eq => (v - self.bound).abs(),
        }
    }

    /// Signed slack: nonnegative iff satisfied, magnitude = distance to
    /// the boundary.
    pub fn slack(&self, v: f64) -> f64 {
        match self.relation {
            Relation::Le => self.bound - v,
            Relation::Ge => v - self.bound,
            Relation::Eq => -(v - self.bound).abs(),
        }
    }
}

/// Uniform band `sup_x |f(x) - g(x)| <= half_width` constraining the
/// admissible response functions around a nominal `g`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FunctionBand {
    pub center: GridFn,
    pub half_width: f64,
}

impl FunctionBand {
    pub fn new(center: GridFn, half_width: f64) -> Result<Self, AdmissibleError> {
        if !(half_width >= 0.0) {
            return Err(AdmissibleError::NegativeHalfWidth(half_width));
        }
        Ok(Self { center, half_width })
    }

    /// Admissible value interval for `f` at position `x`.
    pub fn value_box(&self, x: f64) -> Result<(f64, f64), MeasureError> {
        let c = self.center.eval(x)?;
        Ok((c - self.half_width, c + self.half_width))
    }
}

/// Everything known about the unknown (function, measure) pair: the
/// feasible set of every optimization in this crate.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AdmissibleSet {
    domain: Interval,
    constraints: Vec<MomentConstraint>,
    band: Option<FunctionBand>,
    grid: Vec<f64>,
}

impl AdmissibleSet {
    /// Validates the pieces and probes for feasibility: construction fails
    /// when no admissible measure exists.
    pub fn new(
        domain: Interval,
        constraints: Vec<MomentConstraint>,
        band: Option<FunctionBand>,
        grid: Vec<f64>,
    ) -> Result<Self, AdmissibleError> {
        if grid.is_empty() {
            return Err(AdmissibleError::EmptyGrid);
        }
        for &x in &grid {
            if !domain.contains(x) {
                return Err(AdmissibleError::GridOutsideDomain(x));
            }
        }
        let mut grid = grid;
        grid.sort_by(|a, b| a.partial_cmp(b).unwrap());
        grid.dedup();
        let set = Self {
            domain,
            constraints,
            band,
            grid,
        };
        let best = set.feasibility_probe()?;
        if best > FEASIBILITY_TOL {
            return Err(AdmissibleError::InfeasibleSet { best_violation: best });
        }
        Ok(set)
    }

    /// An unconstrained set over the domain.
    pub fn unconstrained(domain: Interval, grid: Vec<f64>) -> Result<Self, AdmissibleError> {
        Self::new(domain, Vec::new(), None, grid)
    }

    pub fn domain(&self) -> Interval {
        self.domain
    }

    pub fn constraints(&self) -> &[MomentConstraint] {
        &self.constraints
    }

    pub fn band(&self) -> Option<&FunctionBand> {
        self.band.as_ref()
    }

    pub fn grid(&self) -> &[f64] {
        &self.grid
    }

    /// Max moment-constraint violation of a measure (band not involved:
    /// the band constrains functions and is feasible whenever nonempty).
    pub fn max_violation(&self, mu: &DiscreteMeasure) -> Result<f64, MeasureError> {
        let mut worst: f64 = 0.0;
        for c in &self.constraints {
            worst = worst.max(c.violation(moment(mu, &c.g)?));
        }
        Ok(worst)
    }

    /// Exact feasibility decision for measures supported on the probe
    /// lattice (the grid plus interval midpoints): a phase-1 linear
    /// program over the weights. Returns zero when a feasible measure
    /// exists there, otherwise the residual infeasibility.
    fn feasibility_probe(&self) -> Result<f64, AdmissibleError> {
        let mut positions: Vec<f64> = self.grid.clone();
        for pair in self.grid.windows(2) {
            positions.push(0.5 * (pair[0] + pair[1]));
        }
        let mut eq: Vec<(Vec<f64>, f64)> = vec![(vec![1.0; positions.len()], 1.0)];
        let mut ub: Vec<(Vec<f64>, f64)> = Vec::new();
        for c in &self.constraints {
            let coeffs: Vec<f64> = positions
                .iter()
                .map(|&x| c.g.eval(x).map_err(MeasureError::from))
                .collect::<Result<_, _>>()?;
            match c.relation {
                Relation::Le => ub.push((coeffs, c.bound)),
                Relation::Ge => ub.push((coeffs.iter().map(|&a| -a).collect(), -c.bound)),
                Relation::Eq => eq.push((coeffs, c.bound)),
            }
        }
        let zero = vec![0.0; positions.len()];
        match solve_lp(&zero, &eq, &ub) {
            LpOutcome::Optimal { .. } => Ok(0.0),
            LpOutcome::Infeasible { measure } => Ok(measure),
        }
    }
}

/// The finite free-variable layout the bound solver optimizes over:
/// `atoms` Dirac positions in the domain, `atoms` simplex weights, and
/// (when a band is present) one response value per position constrained to
/// the band box.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DiracParametrization {
    pub atoms: usize,
    pub domain: Interval,
    pub band: Option<FunctionBand>,
}

impl DiracParametrization {
    /// Number of free scalar variables.
    pub fn dof(&self) -> usize {
        let per_atom = if self.band.is_some() { 3 } else { 2 };
        // Weights lose one dof to the simplex constraint.
        per_atom * self.atoms - 1
    }
}

/// Reduced parametrization of the admissible set: one Dirac mass more than
/// there are moment constraints suffices for the extremum.
pub fn reduced_parametrization(a_set: &AdmissibleSet) -> DiracParametrization {
    DiracParametrization {
        atoms: a_set.constraints().len() + 1,
        domain: a_set.domain(),
        band: a_set.band().cloned(),
    }
}

/// Per-constraint feasibility report for a (measure, function) candidate.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FeasibilityReport {
    pub feasible: bool,
    /// Signed slack per moment constraint, in declaration order.
    pub slacks: Vec<f64>,
    /// Worst band violation over the support (zero when no band).
    pub band_violation: f64,
    pub max_violation: f64,
}

/// Checks a candidate against every constraint of the set, within the
/// feasibility tolerance. `f` must be present iff the set carries a band.
pub fn is_feasible(
    mu: &DiscreteMeasure,
    f: Option<&GridFn>,
    a_set: &AdmissibleSet,
) -> Result<FeasibilityReport, AdmissibleError> {
    let mut slacks = Vec::with_capacity(a_set.constraints().len());
    let mut max_violation: f64 = 0.0;
    for c in a_set.constraints() {
        let v = moment(mu, &c.g)?;
        slacks.push(c.slack(v));
        max_violation = max_violation.max(c.violation(v));
    }
    let mut band_violation = 0.0f64;
    if let Some(band) = a_set.band() {
        let f = f.ok_or(AdmissibleError::MissingFunction)?;
        // The band is enforced where the function matters: on the support
        // of the measure (all in-scope quantities of interest evaluate f
        // there only).
        for (x, _) in mu.atoms() {
            let (lo, hi) = band.value_box(x)?;
            let y = f.eval(x).map_err(MeasureError::from)?;
            band_violation = band_violation.max((y - hi).max(lo - y).max(0.0));
        }
        max_violation = max_violation.max(band_violation);
    }
    Ok(FeasibilityReport {
        feasible: max_violation <= FEASIBILITY_TOL,
        slacks,
        band_violation,
        max_violation,
    })
}

/// Lattice resolution for [`enumerate_candidates`].
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LatticeSpec {
    /// Weight quantum; weights range over multiples of this step summing
    /// to one.
    pub weight_step: f64,
    /// Positions default to the admissible set's grid when empty.
    pub positions: Vec<f64>,
    /// Band value levels per atom (evenly spaced across the box) when a
    /// band is present.
    pub band_levels: usize,
    /// Cap on the number of enumerated candidates.
    pub cap: usize,
}

impl LatticeSpec {
    pub fn with_weight_step(weight_step: f64) -> Self {
        Self {
            weight_step,
            positions: Vec::new(),
            band_levels: 3,
            cap: 100_000,
        }
    }
}

/// Deterministically enumerates the feasible candidates of a weight/
/// position lattice, in lexicographic weight-vector order. Each candidate
/// is paired with a response function exactly when the set has a band.
pub fn enumerate_candidates(
    a_set: &AdmissibleSet,
    lattice: &LatticeSpec,
) -> Result<Vec<(DiscreteMeasure, Option<GridFn>)>, AdmissibleError> {
    if !(lattice.weight_step > 0.0) {
        return Err(AdmissibleError::NonPositiveStep(lattice.weight_step));
    }
    let positions: Vec<f64> = if lattice.positions.is_empty() {
        a_set.grid().to_vec()
    } else {
        lattice.positions.clone()
    };
    let units = (1.0 / lattice.weight_step).round() as usize;
    if units == 0 {
        return Err(AdmissibleError::NonPositiveStep(lattice.weight_step));
    }
    let n_pos = positions.len();
    let total = simplex_lattice_count(n_pos, units);
    if total > lattice.cap {
        return Err(AdmissibleError::CandidateCapExceeded {
            needed: total,
            cap: lattice.cap,
        });
    }

    let band_fns = band_level_functions(a_set, lattice.band_levels)?;

    let mut out = Vec::new();
    // Compositions of `units` into n_pos parts, lexicographic from
    // (units, 0, ..) down, mirroring the order used for data alphabets.
    let mut counts = vec![0usize; n_pos];
    counts[0] = units;
    loop {
        let weights: Vec<f64> = counts.iter().map(|&c| c as f64 / units as f64).collect();
        let mu = make_measure(&positions, &weights, a_set.domain())?;
        match &band_fns {
            None => {
                if is_feasible(&mu, None, a_set)?.feasible {
                    out.push((mu, None));
                }
            }
            Some(fns) => {
                for f in fns {
                    if is_feasible(&mu, Some(f), a_set)?.feasible {
                        out.push((mu.clone(), Some(f.clone())));
                    }
                }
            }
        }
        if counts[n_pos - 1] == units {
            break;
        }
        let mut i = n_pos - 2;
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
    if out.is_empty() {
        return Err(AdmissibleError::EmptyEnumeration);
    }
    Ok(out)
}

/// Grid-wide band levels: each enumerated response function takes one
/// uniform level across the whole grid (center for level mid, edges at
/// the extremes).
fn band_level_functions(
    a_set: &AdmissibleSet,
    levels: usize,
) -> Result<Option<Vec<GridFn>>, AdmissibleError> {
    let Some(band) = a_set.band() else {
        return Ok(None);
    };
    let levels = levels.max(1);
    let mut fns = Vec::with_capacity(levels);
    for l in 0..levels {
        let t = if levels == 1 {
            0.0
        } else {
            -1.0 + 2.0 * l as f64 / (levels - 1) as f64
        };
        fns.push(band.center.shifted(t * band.half_width));
    }
    Ok(Some(fns))
}

fn simplex_lattice_count(parts: usize, units: usize) -> usize {
    // C(units + parts - 1, parts - 1), saturating.
    let mut count: u128 = 1;
    for i in 0..(parts - 1) {
        count = count.saturating_mul((units + i + 1) as u128) / (i as u128 + 1);
        if count > usize::MAX as u128 {
            return usize::MAX;
        }
    }
    count as usize
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measure::DiscreteMeasure;

    fn id01() -> GridFn {
        GridFn::identity(&[0.0, 1.0]).unwrap()
    }

    fn mean_le(bound: f64) -> AdmissibleSet {
        AdmissibleSet::new(
            Interval::unit(),
            vec![MomentConstraint::new(id01(), Relation::Le, bound).unwrap()],
            None,
            vec![0.0, 0.5, 1.0],
        )
        .unwrap()
    }

    #[test]
    fn one_constraint_means_two_atoms() {
        assert_eq!(reduced_parametrization(&mean_le(0.25)).atoms, 2);
    }

    #[test]
    fn zero_constraints_means_one_atom() {
        let set = AdmissibleSet::unconstrained(Interval::unit(), vec![0.0, 1.0]).unwrap();
        assert_eq!(reduced_parametrization(&set).atoms, 1);
    }

    #[test]
    fn three_constraints_mean_four_atoms() {
        let set = AdmissibleSet::new(
            Interval::unit(),
            vec![
                MomentConstraint::new(id01(), Relation::Le, 0.8).unwrap(),
                MomentConstraint::new(id01(), Relation::Ge, 0.1).unwrap(),
                MomentConstraint::new(
                    GridFn::from_fn(&[0.0, 0.5, 1.0], |x| x * x).unwrap(),
                    Relation::Le,
                    0.9,
                )
                .unwrap(),
            ],
            None,
            vec![0.0, 0.5, 1.0],
        )
        .unwrap();
        assert_eq!(reduced_parametrization(&set).atoms, 4);
    }

    #[test]
    fn feasibility_boundary_and_violation() {
        let set = mean_le(0.25);
        let mu = DiscreteMeasure::new(&[0.0, 0.5], &[0.5, 0.5], Interval::unit()).unwrap();
        let rep = is_feasible(&mu, None, &set).unwrap();
        assert!(rep.feasible);
        assert!(rep.slacks[0].abs() < 1e-12);

        let dirac1 = DiscreteMeasure::dirac(1.0, Interval::unit()).unwrap();
        let rep = is_feasible(&dirac1, None, &set).unwrap();
        assert!(!rep.feasible);
        assert!((rep.slacks[0] + 0.75).abs() < 1e-12);
        assert!((rep.max_violation - 0.75).abs() < 1e-12);
    }

    #[test]
    fn band_boundary_is_feasible() {
        let g = GridFn::constant(&[0.0, 1.0], 0.3).unwrap();
        let set = AdmissibleSet::new(
            Interval::unit(),
            vec![],
            Some(FunctionBand::new(g.clone(), 0.1).unwrap()),
            vec![0.0, 1.0],
        )
        .unwrap();
        let mu = DiscreteMeasure::dirac(0.5, Interval::unit()).unwrap();
        let f = g.shifted(0.1);
        assert!(is_feasible(&mu, Some(&f), &set).unwrap().feasible);
        let f_out = g.shifted(0.1 + 1e-6);
        assert!(!is_feasible(&mu, Some(&f_out), &set).unwrap().feasible);
        assert!(matches!(
            is_feasible(&mu, None, &set),
            Err(AdmissibleError::MissingFunction)
        ));
    }

    #[test]
    fn infeasible_set_rejected_at_construction() {
        let err = AdmissibleSet::new(
            Interval::unit(),
            vec![MomentConstraint::new(id01(), Relation::Le, -1.0).unwrap()],
            None,
            vec![0.0, 0.5, 1.0],
        );
        assert!(matches!(err, Err(AdmissibleError::InfeasibleSet { .. })));
    }

    #[test]
    fn lattice_enumeration_filters_by_mean() {
        let set = mean_le(0.25);
        let lattice = LatticeSpec {
            weight_step: 0.5,
            positions: vec![0.0, 0.5, 1.0],
            band_levels: 3,
            cap: 1000,
        };
        let candidates = enumerate_candidates(&set, &lattice).unwrap();
        assert!(!candidates.is_empty());
        for (mu, _) in &candidates {
            let rep = is_feasible(mu, None, &set).unwrap();
            assert!(rep.feasible);
            assert!(mu.mean() <= 0.25 + FEASIBILITY_TOL);
        }
    }

    #[test]
    fn unconstrained_two_position_lattice_has_three_candidates() {
        let set = AdmissibleSet::unconstrained(Interval::unit(), vec![0.0, 1.0]).unwrap();
        let lattice = LatticeSpec {
            weight_step: 0.5,
            positions: vec![0.0, 1.0],
            band_levels: 3,
            cap: 1000,
        };
        let candidates = enumerate_candidates(&set, &lattice).unwrap();
        assert_eq!(candidates.len(), 3);
    }

    #[test]
    fn lattice_cap_enforced() {
        let set = AdmissibleSet::unconstrained(Interval::unit(), vec![0.0, 0.5, 1.0]).unwrap();
        let lattice = LatticeSpec {
            weight_step: 0.01,
            positions: vec![0.0, 0.25, 0.5, 0.75, 1.0],
            band_levels: 3,
            cap: 100,
        };
        assert!(matches!(
            enumerate_candidates(&set, &lattice),
            Err(AdmissibleError::CandidateCapExceeded { .. })
        ));
    }

    #[test]
    fn relaxing_a_bound_preserves_feasibility() {
        // Monotonicity: a candidate feasible for E[X] <= b stays feasible
        // for any larger bound.
        let tight = mean_le(0.3);
        let loose = mean_le(0.6);
        let lattice = LatticeSpec {
            weight_step: 0.25,
            positions: vec![0.0, 0.5, 1.0],
            band_levels: 3,
            cap: 10_000,
        };
        for (mu, _) in enumerate_candidates(&tight, &lattice).unwrap() {
            assert!(is_feasible(&mu, None, &loose).unwrap().feasible);
        }
    }
}
