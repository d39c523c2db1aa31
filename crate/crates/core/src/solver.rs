//! Optimal bounds `U(A)` and `L(A)` on a quantity of interest over an
//! admissible set, by multistart derivative-free search over the reduced
//! Dirac parametrization.
//!
//! The search explores atom positions (and, when a band is present, one
//! banded response value per atom); at every trial configuration the
//! weights are optimized exactly by a small linear program over the
//! simplex cut by the moment constraints, since both in-scope quantities
//! of interest are linear in the weights. Infeasible configurations are
//! ranked by their phase-1 infeasibility so the search can walk into the
//! feasible region. Every returned extremizer is feasible and the
//! reported value is the quantity of interest evaluated on it.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::admissible::{
    is_feasible, reduced_parametrization, AdmissibleError, AdmissibleSet, FunctionBand, Relation,
    FEASIBILITY_TOL,
};
use crate::grid::{canonicalize, GridFn, Interval};
use crate::measure::{make_measure, DiscreteMeasure, MeasureError, QuantityOfInterest};
use crate::numeric::{project_simplex, random_simplex_point, solve_lp, LpOutcome};

#[derive(Debug, Error)]
pub enum SolverError {
    #[error("no restart produced a feasible extremizer")]
    InfeasibleSet,
    #[error("numerical failure: {0}")]
    NumericalFailure(String),
    #[error("markov oracle requires 0 < m < a <= 1, got m={m}, a={a}")]
    DomainError { m: f64, a: f64 },
    #[error(transparent)]
    Measure(#[from] MeasureError),
    #[error(transparent)]
    Admissible(#[from] AdmissibleError),
}

/// Knobs exposed on the command line.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct SolverOptions {
    pub restarts: usize,
    pub max_iters: usize,
    /// Improvement threshold for convergence.
    pub tol: f64,
    pub seed: u64,
    /// Sweeps without a `tol` improvement before a restart stops.
    pub patience: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            restarts: 32,
            max_iters: 10_000,
            tol: 1e-9,
            seed: 0,
            patience: 50,
        }
    }
}

impl SolverOptions {
    pub fn with_seed(seed: u64) -> Self {
        Self {
            seed,
            ..Self::default()
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SolverStatus {
    Converged,
    MaxIter,
}

/// Per-run diagnostics: restart count, total sweeps, and the feasible
/// value each restart settled on (NaN for restarts whose repair failed).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SolverTrace {
    pub restarts: usize,
    pub iterations: usize,
    pub best_per_restart: Vec<f64>,
}

/// A certified one-sided bound: the extremizer is feasible and reproduces
/// `value` under the quantity of interest.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BoundResult {
    pub value: f64,
    pub extremizer: DiscreteMeasure,
    /// Optimized response function (present iff the set has a band),
    /// tabulated at the extremizer's atoms.
    pub band_values: Option<GridFn>,
    pub trace: SolverTrace,
    pub status: SolverStatus,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Sense {
    Sup,
    Inf,
}

/// Optimal upper bound `U(A) = sup Phi` over the admissible set.
pub fn upper_bound(
    a_set: &AdmissibleSet,
    phi: &QuantityOfInterest,
    opts: &SolverOptions,
) -> Result<BoundResult, SolverError> {
    optimize(a_set, phi, opts, Sense::Sup, None)
}

/// Optimal lower bound `L(A) = inf Phi` over the admissible set.
pub fn lower_bound(
    a_set: &AdmissibleSet,
    phi: &QuantityOfInterest,
    opts: &SolverOptions,
) -> Result<BoundResult, SolverError> {
    optimize(a_set, phi, opts, Sense::Inf, None)
}

/// [`upper_bound`] with an explicit atom count, overriding the reduced
/// parametrization. Adding atoms beyond the reduction count must not
/// improve the optimum; this entry point exists to verify exactly that.
pub fn upper_bound_with_atoms(
    a_set: &AdmissibleSet,
    phi: &QuantityOfInterest,
    opts: &SolverOptions,
    atoms: usize,
) -> Result<BoundResult, SolverError> {
    optimize(a_set, phi, opts, Sense::Sup, Some(atoms))
}

/// [`lower_bound`] with an explicit atom count.
pub fn lower_bound_with_atoms(
    a_set: &AdmissibleSet,
    phi: &QuantityOfInterest,
    opts: &SolverOptions,
    atoms: usize,
) -> Result<BoundResult, SolverError> {
    optimize(a_set, phi, opts, Sense::Inf, Some(atoms))
}

/// Certification verdict for a tail-probability quantity of interest
/// against a safety threshold epsilon.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Certification {
    Safe,
    Unsafe,
    Undecided,
}

/// Output of [`certify`]: the verdict together with both bounds.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CertifyResult {
    pub verdict: Certification,
    pub lower: BoundResult,
    pub upper: BoundResult,
    pub epsilon: f64,
}

/// Worst-case certification: `Safe` when even the worst admissible
/// scenario stays below epsilon, `Unsafe` when even the best one exceeds
/// it, `Undecided` otherwise.
pub fn certify(
    a_set: &AdmissibleSet,
    phi: &QuantityOfInterest,
    epsilon: f64,
    opts: &SolverOptions,
) -> Result<CertifyResult, SolverError> {
    let upper = upper_bound(a_set, phi, opts)?;
    let lower = lower_bound(a_set, phi, opts)?;
    let verdict = if upper.value <= epsilon {
        Certification::Safe
    } else if lower.value > epsilon {
        Certification::Unsafe
    } else {
        Certification::Undecided
    };
    Ok(CertifyResult {
        verdict,
        lower,
        upper,
        epsilon,
    })
}

/// Closed-form optimum of the warm-up problem: sup of `mu[X >= a]` over
/// measures on `[0, 1]` with mean at most `m` equals `min(1, m/a)`.
/// Regression oracle for [`upper_bound`].
pub fn markov_oracle(m: f64, a: f64) -> Result<f64, SolverError> {
    if !(m > 0.0 && m < a && a <= 1.0) {
        return Err(SolverError::DomainError { m, a });
    }
    Ok((m / a).min(1.0))
}

// ---------------------------------------------------------------------------
// Search internals
// ---------------------------------------------------------------------------
//
// For tail-probability and expectation quantities of interest, the weight
// subproblem at fixed atom positions (and band values) is a linear program
// over the simplex cut by the moment constraints; it is solved exactly for
// every trial configuration, so the derivative-free search only has to
// explore positions and band values. Custom quantities of interest keep a
// penalized search over the weights with a final projection repair.

#[derive(Clone)]
struct SearchPoint {
    pos: Vec<f64>,
    fvals: Option<Vec<f64>>,
}

#[derive(Clone)]
struct PenaltyPoint {
    pos: Vec<f64>,
    w: Vec<f64>,
    fvals: Option<Vec<f64>>,
}

struct Problem<'a> {
    a_set: &'a AdmissibleSet,
    phi: &'a QuantityOfInterest,
    atoms: usize,
    band: Option<&'a FunctionBand>,
    domain: Interval,
    sense: Sense,
}

struct RestartOutcome {
    /// Raw quantity-of-interest value at the feasible point.
    value: f64,
    pos: Vec<f64>,
    w: Vec<f64>,
    fvals: Option<Vec<f64>>,
    sweeps: usize,
    converged: bool,
}

/// Score used by the pattern search: any feasible configuration beats any
/// infeasible one; infeasible ones improve as the phase-1 measure drops.
const INFEASIBLE_SCORE: f64 = -1e12;

impl Problem<'_> {
    fn signed(&self, raw: f64) -> f64 {
        match self.sense {
            Sense::Sup => raw,
            Sense::Inf => -raw,
        }
    }

    /// Response value at an atom: the band value when the quantity of
    /// interest reads the paired function, the fixed tabulation otherwise.
    fn response_at(
        &self,
        source: &crate::measure::FnSource,
        pos: f64,
        fval: Option<f64>,
    ) -> Result<f64, MeasureError> {
        match (source, fval) {
            (crate::measure::FnSource::Fixed(g), _) => Ok(g.eval(pos)?),
            (crate::measure::FnSource::Paired, Some(v)) => Ok(v),
            (crate::measure::FnSource::Paired, None) => Err(MeasureError::UndefinedAtSupport(
                crate::grid::GridError::EmptyTabulation,
            )),
        }
    }

    /// Per-atom objective coefficients of the weight LP; `None` for custom
    /// quantities of interest (not linear in the weights).
    fn lp_coeffs(&self, p: &SearchPoint) -> Result<Option<Vec<f64>>, MeasureError> {
        let fval = |i: usize| p.fvals.as_ref().map(|fv| fv[i]);
        match self.phi {
            QuantityOfInterest::TailProbability { f, threshold } => {
                let mut c = Vec::with_capacity(self.atoms);
                for i in 0..self.atoms {
                    let fi = self.response_at(f, p.pos[i], fval(i))?;
                    c.push(if fi >= *threshold { 1.0 } else { 0.0 });
                }
                Ok(Some(c))
            }
            QuantityOfInterest::Expectation { f } => {
                let mut c = Vec::with_capacity(self.atoms);
                for i in 0..self.atoms {
                    c.push(self.response_at(f, p.pos[i], fval(i))?);
                }
                Ok(Some(c))
            }
            QuantityOfInterest::Custom { .. } => Ok(None),
        }
    }

    /// Constraint rows of the weight LP at fixed positions.
    fn lp_rows(
        &self,
        pos: &[f64],
    ) -> Result<(Vec<(Vec<f64>, f64)>, Vec<(Vec<f64>, f64)>), MeasureError> {
        let mut eq: Vec<(Vec<f64>, f64)> = vec![(vec![1.0; self.atoms], 1.0)];
        let mut ub: Vec<(Vec<f64>, f64)> = Vec::new();
        for c in self.a_set.constraints() {
            let coeffs: Vec<f64> = pos
                .iter()
                .map(|&x| c.g.eval(x))
                .collect::<Result<_, _>>()?;
            match c.relation {
                Relation::Le => ub.push((coeffs, c.bound)),
                Relation::Ge => {
                    ub.push((coeffs.iter().map(|&a| -a).collect(), -c.bound));
                }
                Relation::Eq => eq.push((coeffs, c.bound)),
            }
        }
        Ok((eq, ub))
    }

    /// Best feasible weights at this configuration, with the score the
    /// pattern search maximizes.
    fn evaluate_lp(&self, p: &SearchPoint) -> (f64, Option<(Vec<f64>, f64)>) {
        let Ok(Some(coeffs)) = self.lp_coeffs(p) else {
            return (f64::NEG_INFINITY, None);
        };
        let Ok((eq, ub)) = self.lp_rows(&p.pos) else {
            return (f64::NEG_INFINITY, None);
        };
        let c: Vec<f64> = match self.sense {
            Sense::Sup => coeffs.iter().map(|&x| -x).collect(),
            Sense::Inf => coeffs.clone(),
        };
        match solve_lp(&c, &eq, &ub) {
            LpOutcome::Optimal { x, objective } => {
                let raw: f64 = coeffs.iter().zip(&x).map(|(ci, xi)| ci * xi).sum();
                (-objective, Some((x, raw)))
            }
            LpOutcome::Infeasible { measure } => (INFEASIBLE_SCORE - measure, None),
        }
    }

    fn clamp_fvals(&self, p: &mut SearchPoint) {
        if let (Some(band), Some(fvals)) = (self.band, p.fvals.as_mut()) {
            for i in 0..self.atoms {
                if let Ok((lo, hi)) = band.value_box(p.pos[i]) {
                    fvals[i] = fvals[i].clamp(lo, hi);
                }
            }
        }
    }

    // -- penalty path (custom quantities of interest) --

    fn raw_phi_penalty(&self, p: &PenaltyPoint) -> Result<f64, MeasureError> {
        match self.phi {
            QuantityOfInterest::Custom { map, .. } => {
                let mu = make_measure(&p.pos, &p.w, self.domain)?;
                Ok(map(&mu))
            }
            _ => unreachable!("penalty path only runs for custom quantities"),
        }
    }

    fn violation_sq(&self, p: &PenaltyPoint) -> Result<f64, MeasureError> {
        let mut acc = 0.0;
        for c in self.a_set.constraints() {
            let mut v = 0.0;
            for i in 0..self.atoms {
                v += p.w[i] * c.g.eval(p.pos[i])?;
            }
            let viol = c.violation(v);
            acc += viol * viol;
        }
        Ok(acc)
    }

    fn max_violation(&self, p: &PenaltyPoint) -> Result<f64, MeasureError> {
        let mut worst: f64 = 0.0;
        for c in self.a_set.constraints() {
            let mut v = 0.0;
            for i in 0..self.atoms {
                v += p.w[i] * c.g.eval(p.pos[i])?;
            }
            worst = worst.max(c.violation(v));
        }
        Ok(worst)
    }

    fn penalized(&self, p: &PenaltyPoint, rho: f64) -> f64 {
        match (self.raw_phi_penalty(p), self.violation_sq(p)) {
            (Ok(v), Ok(viol2)) => self.signed(v) - rho * viol2,
            _ => f64::NEG_INFINITY,
        }
    }
}

fn optimize(
    a_set: &AdmissibleSet,
    phi: &QuantityOfInterest,
    opts: &SolverOptions,
    sense: Sense,
    atoms: Option<usize>,
) -> Result<BoundResult, SolverError> {
    let param = reduced_parametrization(a_set);
    let domain = a_set.domain();
    validate_tabulations(a_set, phi)?;
    let problem = Problem {
        a_set,
        phi,
        atoms: atoms.unwrap_or(param.atoms).max(1),
        band: a_set.band(),
        domain,
        sense,
    };
    let custom = matches!(phi, QuantityOfInterest::Custom { .. });

    let restarts = opts.restarts.max(1);
    let outcomes: Vec<Option<RestartOutcome>> = (0..restarts)
        .into_par_iter()
        .map(|r| {
            if custom {
                run_restart_penalty(&problem, opts, r)
            } else {
                run_restart_lp(&problem, opts, r)
            }
        })
        .collect();

    let mut best: Option<&RestartOutcome> = None;
    let mut best_per_restart = Vec::with_capacity(restarts);
    let mut total_sweeps = 0;
    for o in outcomes.iter() {
        match o {
            Some(out) => {
                total_sweeps += out.sweeps;
                best_per_restart.push(out.value);
                let better = match best {
                    None => true,
                    Some(b) => problem.signed(out.value) > problem.signed(b.value),
                };
                if better {
                    best = Some(out);
                }
            }
            None => best_per_restart.push(f64::NAN),
        }
    }
    let Some(best) = best else {
        return Err(SolverError::InfeasibleSet);
    };

    // Materialize the extremizer and recompute the certified value on it.
    let weights: Vec<f64> = best.w.iter().map(|&w| w.max(0.0)).collect();
    let extremizer = make_measure(&best.pos, &weights, domain)?;
    let band_values = match (&best.fvals, a_set.band()) {
        (Some(fvals), Some(_)) => {
            let pairs: Vec<(f64, f64)> = best
                .pos
                .iter()
                .copied()
                .zip(fvals.iter().copied())
                .collect();
            Some(GridFn::from_pairs(&pairs).map_err(MeasureError::from)?)
        }
        _ => None,
    };
    let report = is_feasible(&extremizer, band_values.as_ref(), a_set)?;
    if !report.feasible {
        return Err(SolverError::NumericalFailure(format!(
            "extremizer violates constraints by {:.3e}",
            report.max_violation
        )));
    }
    let value = phi.evaluate_pair(&extremizer, band_values.as_ref())?;

    Ok(BoundResult {
        value,
        extremizer,
        band_values,
        trace: SolverTrace {
            restarts,
            iterations: total_sweeps,
            best_per_restart,
        },
        status: if best.converged {
            SolverStatus::Converged
        } else {
            SolverStatus::MaxIter
        },
    })
}

/// All tabulated functions must cover the domain, otherwise a moving atom
/// could step off the tabulation mid-search.
fn validate_tabulations(
    a_set: &AdmissibleSet,
    phi: &QuantityOfInterest,
) -> Result<(), SolverError> {
    let domain = a_set.domain();
    let check = |g: &GridFn| -> Result<(), SolverError> {
        g.eval(domain.lo).map_err(MeasureError::from)?;
        g.eval(domain.hi).map_err(MeasureError::from)?;
        Ok(())
    };
    for c in a_set.constraints() {
        check(&c.g)?;
    }
    if let Some(b) = a_set.band() {
        check(&b.center)?;
    }
    match phi {
        QuantityOfInterest::TailProbability { f, .. } | QuantityOfInterest::Expectation { f } => {
            if let crate::measure::FnSource::Fixed(g) = f {
                check(g)?;
            }
        }
        QuantityOfInterest::Custom { .. } => {}
    }
    Ok(())
}

/// Deterministic pool of structurally interesting positions: domain
/// endpoints, the tail threshold, the midpoint. Extremizers of the worked
/// moment problems sit on these.
fn seed_pool(problem: &Problem<'_>) -> Vec<f64> {
    let d = problem.domain;
    let mut pool = vec![d.lo];
    if let QuantityOfInterest::TailProbability { threshold, .. } = problem.phi {
        if d.contains(*threshold) {
            pool.push(*threshold);
        }
    }
    pool.push(d.hi);
    pool.push(0.5 * (d.lo + d.hi));
    pool
}

fn seed_positions(
    problem: &Problem<'_>,
    rng: &mut ChaCha8Rng,
    restart: usize,
) -> Vec<f64> {
    let k = problem.atoms;
    let d = problem.domain;
    let pool = seed_pool(problem);
    let pos: Vec<f64> = if restart < pool.len() {
        // Deterministic seeds: rotations of the pool, so every pool point
        // appears as a leading atom in some restart.
        (0..k).map(|i| pool[(i + restart) % pool.len()]).collect()
    } else if restart < pool.len() + 2 && problem.a_set.grid().len() >= 2 {
        // Grid-based seeds.
        let grid = problem.a_set.grid();
        (0..k)
            .map(|i| grid[(i * (grid.len() - 1) / k.max(1)).min(grid.len() - 1)])
            .collect()
    } else {
        (0..k).map(|_| d.lo + rng.gen::<f64>() * d.width()).collect()
    };
    pos.into_iter().map(canonicalize).collect()
}

fn seed_fvals(problem: &Problem<'_>, pos: &[f64]) -> Option<Vec<f64>> {
    problem.band.map(|band| {
        pos.iter()
            .map(|&x| {
                band.value_box(x)
                    .map(|(lo, hi)| 0.5 * (lo + hi))
                    .unwrap_or(0.0)
            })
            .collect()
    })
}

fn restart_rng(opts: &SolverOptions, restart: usize) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(opts.seed ^ (restart as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15))
}

fn run_restart_lp(
    problem: &Problem<'_>,
    opts: &SolverOptions,
    restart: usize,
) -> Option<RestartOutcome> {
    let mut rng = restart_rng(opts, restart);
    let d = problem.domain;
    let pos = seed_positions(problem, &mut rng, restart);
    let fvals = seed_fvals(problem, &pos);
    let mut point = SearchPoint { pos, fvals };
    problem.clamp_fvals(&mut point);

    let init_pos_step = (d.width() / 8.0).max(1e-6);
    let init_f_step = problem
        .band
        .map(|b| (b.half_width / 4.0).max(1e-9))
        .unwrap_or(0.0);
    let mut pos_step = init_pos_step;
    let mut f_step = init_f_step;

    let (mut best_score, mut best_w) = problem.evaluate_lp(&point);
    let mut marked = best_score;
    let mut since_mark = 0usize;
    let mut sweeps = 0usize;
    let mut converged = false;
    let k = problem.atoms;

    while sweeps < opts.max_iters {
        sweeps += 1;
        let mut moved_pos = false;
        let mut moved_f = false;

        if d.width() > 0.0 {
            for i in 0..k {
                for dir in [1.0, -1.0] {
                    let mut trial = point.clone();
                    // Positions live on the canonical lattice so the
                    // materialized extremizer is exactly the searched one.
                    trial.pos[i] = canonicalize(d.clamp(trial.pos[i] + dir * pos_step));
                    problem.clamp_fvals(&mut trial);
                    let (score, w) = problem.evaluate_lp(&trial);
                    if score > best_score {
                        best_score = score;
                        best_w = w;
                        point = trial;
                        moved_pos = true;
                    }
                }
            }
        }
        if let Some(band) = problem.band {
            for i in 0..k {
                for dir in [1.0, -1.0] {
                    let mut trial = point.clone();
                    if let Some(fv) = trial.fvals.as_mut() {
                        if let Ok((lo, hi)) = band.value_box(trial.pos[i]) {
                            fv[i] = (fv[i] + dir * f_step).clamp(lo, hi);
                        }
                    }
                    let (score, w) = problem.evaluate_lp(&trial);
                    if score > best_score {
                        best_score = score;
                        best_w = w;
                        point = trial;
                        moved_f = true;
                    }
                }
            }
        }

        if !moved_pos {
            pos_step *= 0.5;
        }
        if !moved_f {
            f_step *= 0.5;
        }
        if best_score > marked + opts.tol {
            marked = best_score;
            since_mark = 0;
        } else {
            since_mark += 1;
        }
        if since_mark >= opts.patience || (pos_step < 1e-12 && f_step < 1e-12) {
            converged = true;
            break;
        }
    }

    let (w, raw) = best_w?;
    Some(RestartOutcome {
        value: raw,
        pos: point.pos,
        w,
        fvals: point.fvals,
        sweeps,
        converged,
    })
}

// ---------------------------------------------------------------------------
// Penalty path (custom quantities of interest)
// ---------------------------------------------------------------------------

fn run_restart_penalty(
    problem: &Problem<'_>,
    opts: &SolverOptions,
    restart: usize,
) -> Option<RestartOutcome> {
    let mut rng = restart_rng(opts, restart);
    let k = problem.atoms;
    let pos = seed_positions(problem, &mut rng, restart);
    let fvals = seed_fvals(problem, &pos);
    let w = if restart % 2 == 0 {
        vec![1.0 / k as f64; k]
    } else {
        random_simplex_point(&mut rng, k)
    };
    let mut point = PenaltyPoint { pos, w, fvals };

    let (sweeps, converged) = penalty_search(problem, opts, &mut point);
    let point = repair_weights(problem, point)?;
    let value = problem.raw_phi_penalty(&point).ok()?;
    Some(RestartOutcome {
        value,
        pos: point.pos,
        w: point.w,
        fvals: point.fvals,
        sweeps,
        converged,
    })
}

/// Coordinate-wise pattern search on the penalized objective, with step
/// halving and escalating penalty weight.
fn penalty_search(
    problem: &Problem<'_>,
    opts: &SolverOptions,
    point: &mut PenaltyPoint,
) -> (usize, bool) {
    let k = problem.atoms;
    let d = problem.domain;
    let init_pos_step = (d.width() / 8.0).max(1e-6);
    let init_w_step = 0.25;
    let init_f_step = problem
        .band
        .map(|b| (b.half_width / 4.0).max(1e-9))
        .unwrap_or(0.0);

    let mut rho = 1e4;
    let mut pos_step = init_pos_step;
    let mut w_step = init_w_step;
    let mut f_step = init_f_step;

    let clamp_f = |p: &mut PenaltyPoint| {
        if let (Some(band), Some(fvals)) = (problem.band, p.fvals.as_mut()) {
            for i in 0..k {
                if let Ok((lo, hi)) = band.value_box(p.pos[i]) {
                    fvals[i] = fvals[i].clamp(lo, hi);
                }
            }
        }
    };
    clamp_f(point);
    let mut best = problem.penalized(point, rho);
    let mut marked = best;
    let mut since_mark = 0usize;
    let mut sweeps = 0usize;
    let mut converged = false;

    while sweeps < opts.max_iters {
        sweeps += 1;
        let mut moved_pos = false;
        let mut moved_w = false;
        let mut moved_f = false;

        if d.width() > 0.0 {
            for i in 0..k {
                for dir in [1.0, -1.0] {
                    let mut trial = point.clone();
                    trial.pos[i] = canonicalize(d.clamp(trial.pos[i] + dir * pos_step));
                    clamp_f(&mut trial);
                    let v = problem.penalized(&trial, rho);
                    if v > best {
                        best = v;
                        *point = trial;
                        moved_pos = true;
                    }
                }
            }
        }
        if k > 1 {
            for i in 0..k {
                for dir in [1.0, -1.0] {
                    let mut raw = point.w.clone();
                    raw[i] += dir * w_step;
                    let mut trial = point.clone();
                    trial.w = project_simplex(&raw);
                    let v = problem.penalized(&trial, rho);
                    if v > best {
                        best = v;
                        *point = trial;
                        moved_w = true;
                    }
                }
            }
        }
        if let Some(band) = problem.band {
            for i in 0..k {
                for dir in [1.0, -1.0] {
                    let mut trial = point.clone();
                    if let Some(fv) = trial.fvals.as_mut() {
                        if let Ok((lo, hi)) = band.value_box(trial.pos[i]) {
                            fv[i] = (fv[i] + dir * f_step).clamp(lo, hi);
                        }
                    }
                    let v = problem.penalized(&trial, rho);
                    if v > best {
                        best = v;
                        *point = trial;
                        moved_f = true;
                    }
                }
            }
        }

        if !moved_pos {
            pos_step *= 0.5;
        }
        if !moved_w {
            w_step *= 0.5;
        }
        if !moved_f {
            f_step *= 0.5;
        }
        if best > marked + opts.tol {
            marked = best;
            since_mark = 0;
        } else {
            since_mark += 1;
        }

        let steps_exhausted = pos_step < 1e-12 && w_step < 1e-12 && f_step < 1e-12;
        if since_mark >= opts.patience || steps_exhausted {
            let feasible_enough = problem
                .max_violation(point)
                .map(|v| v <= FEASIBILITY_TOL)
                .unwrap_or(false);
            if !feasible_enough && rho < 1e10 {
                // Escalate the penalty and keep searching from here.
                rho *= 1e3;
                best = problem.penalized(point, rho);
                marked = best;
                since_mark = 0;
                pos_step = (init_pos_step * 0.25).max(1e-9);
                w_step = init_w_step * 0.25;
                f_step = init_f_step * 0.25;
                continue;
            }
            converged = true;
            break;
        }
    }
    (sweeps, converged)
}

/// Projects the weights onto the exact feasible polytope at fixed
/// positions (Dykstra's alternating projections between the simplex and
/// the moment half-spaces). Returns `None` when no feasible weights exist
/// there.
fn repair_weights(problem: &Problem<'_>, mut point: PenaltyPoint) -> Option<PenaltyPoint> {
    let k = problem.atoms;
    let mut rows: Vec<(Vec<f64>, f64, bool)> = Vec::new();
    for c in problem.a_set.constraints() {
        let coeffs: Vec<f64> = point
            .pos
            .iter()
            .map(|&x| c.g.eval(x))
            .collect::<Result<_, _>>()
            .ok()?;
        match c.relation {
            Relation::Le => rows.push((coeffs, c.bound, false)),
            Relation::Ge => rows.push((coeffs.iter().map(|&a| -a).collect(), -c.bound, false)),
            Relation::Eq => rows.push((coeffs, c.bound, true)),
        }
    }
    if rows.is_empty() {
        point.w = project_simplex(&point.w);
        return Some(point);
    }

    let n_sets = rows.len() + 1;
    let mut w = project_simplex(&point.w);
    let mut corrections = vec![vec![0.0; k]; n_sets];
    for _cycle in 0..20_000 {
        let mut moved = 0.0f64;
        for (s, row) in rows.iter().enumerate() {
            let mut y: Vec<f64> = (0..k).map(|i| w[i] + corrections[s][i]).collect();
            let projected = project_halfspace(&y, &row.0, row.1, row.2);
            for i in 0..k {
                corrections[s][i] = y[i] - projected[i];
                moved = moved.max((projected[i] - w[i]).abs());
                y[i] = projected[i];
            }
            w = y;
        }
        let s = rows.len();
        let y: Vec<f64> = (0..k).map(|i| w[i] + corrections[s][i]).collect();
        let projected = project_simplex(&y);
        for i in 0..k {
            corrections[s][i] = y[i] - projected[i];
            moved = moved.max((projected[i] - w[i]).abs());
        }
        w = projected;
        if moved < 1e-15 {
            break;
        }
    }
    point.w = w;
    let viol = problem.max_violation(&point).ok()?;
    if viol > FEASIBILITY_TOL {
        return None;
    }
    Some(point)
}

fn project_halfspace(y: &[f64], a: &[f64], b: f64, equality: bool) -> Vec<f64> {
    let dot: f64 = y.iter().zip(a).map(|(yi, ai)| yi * ai).sum();
    let norm2: f64 = a.iter().map(|ai| ai * ai).sum();
    if norm2 < 1e-300 {
        return y.to_vec();
    }
    let excess = dot - b;
    if !equality && excess <= 0.0 {
        return y.to_vec();
    }
    let t = excess / norm2;
    y.iter().zip(a).map(|(yi, ai)| yi - t * ai).collect()
}
