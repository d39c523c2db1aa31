//! The Wald decision game over a finite candidate family: Bayes
//! estimators, least favorable priors, minimax estimators with duality
//! certificates, experiment ordering, and estimator mixing.
//!
//! For squared loss the Bayes estimator is the posterior mean and the
//! Bayes-risk objective `J(pi) = Er(theta_pi, pi)` is concave in the
//! prior (it is a minimum of affine functions), so the least favorable
//! prior is found by projected supergradient ascent followed by a Newton
//! equalization polish on the active support: at the optimum every
//! supported candidate attains the same risk, which drives the duality
//! gap to solver precision. For threshold loss the game is solved by a
//! double oracle over (deterministic estimators, candidate indices) with
//! restricted matrix games solved by a linear program over mixed
//! strategies.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::grid::canonical_key;
use crate::numeric::{project_simplex, solve_linear};
use crate::risk::{
    averaged_risk, statistical_error, worst_case_error, Candidate, CandidateFamily, DataMap,
    Estimator, LossFunction, RiskError,
};

#[derive(Debug, Error)]
pub enum GameError {
    #[error("prior weights are all zero")]
    DegeneratePrior,
    #[error("candidate list is empty")]
    EmptyCandidates,
    #[error("prior has {prior} weights for {candidates} candidates")]
    LengthMismatch { prior: usize, candidates: usize },
    #[error("threshold loss is not convex; mixing requires squared loss")]
    NonConvexLoss,
    #[error("estimator mixing requires deterministic estimators")]
    RandomizedUnsupported,
    #[error("linear program failed: {0}")]
    LpFailure(String),
    #[error(transparent)]
    Risk(#[from] RiskError),
}

/// Convex weights over the candidate list: the Universe's mixed strategy.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Prior(Vec<f64>);

impl Prior {
    /// Normalizes nonnegative weights onto the simplex.
    pub fn new(weights: &[f64]) -> Result<Self, GameError> {
        if weights.is_empty() {
            return Err(GameError::EmptyCandidates);
        }
        let total: f64 = weights.iter().sum();
        if !(total > 0.0) || weights.iter().any(|&w| w < 0.0 || !w.is_finite()) {
            return Err(GameError::DegeneratePrior);
        }
        Ok(Self(weights.iter().map(|&w| w / total).collect()))
    }

    pub fn uniform(n: usize) -> Self {
        Self(vec![1.0 / n as f64; n])
    }

    pub fn point_mass(k: usize, n: usize) -> Result<Self, GameError> {
        if k >= n {
            return Err(GameError::LengthMismatch {
                prior: k,
                candidates: n,
            });
        }
        let mut w = vec![0.0; n];
        w[k] = 1.0;
        Ok(Self(w))
    }

    pub fn weights(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Support under a mass threshold of zero (structural support).
    pub fn support(&self) -> Vec<usize> {
        self.0
            .iter()
            .enumerate()
            .filter(|(_, &w)| w > 0.0)
            .map(|(i, _)| i)
            .collect()
    }
}

/// Iteration knobs for the game solvers.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct GameOptions {
    pub max_iters: usize,
    pub tol: f64,
    pub seed: u64,
}

impl Default for GameOptions {
    fn default() -> Self {
        Self {
            max_iters: 5000,
            tol: 1e-9,
            seed: 0,
        }
    }
}

/// A solved decision game with its duality certificate.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GameSolution {
    /// The (near-)minimax estimator: Bayes against the least favorable
    /// prior for squared loss, a mixed strategy over deterministic
    /// estimators for threshold loss.
    pub estimator: Estimator,
    pub least_favorable_prior: Prior,
    /// Worst-case risk of `estimator` over the candidate list.
    pub minimax_value: f64,
    /// Bayes risk of the least favorable prior (a lower bound on the
    /// game value).
    pub maximin_value: f64,
    pub duality_gap: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Best deterministic rounding of a mixed solution (threshold loss
    /// only), with its worst-case risk.
    pub deterministic_estimator: Option<Estimator>,
    pub deterministic_value: Option<f64>,
    /// Bayes risk after each accepted prior-ascent step (squared loss).
    pub ascent_trajectory: Vec<f64>,
}

// ---------------------------------------------------------------------------
// Bayes estimators
// ---------------------------------------------------------------------------

/// Prior mean of the quantity of interest: the canonical value assigned
/// on data symbols with zero marginal mass.
fn prior_mean_phi(prior: &Prior, candidates: &[Candidate]) -> f64 {
    prior
        .weights()
        .iter()
        .zip(candidates)
        .map(|(w, c)| w * c.phi_value)
        .sum()
}

/// Bayes estimator against a prior.
///
/// Squared loss: the posterior mean of the quantity of interest per data
/// symbol; symbols with zero marginal mass take the prior mean (the
/// canonical version; the brittleness module explores the others).
/// Threshold loss: the center of the best window of width `2 gamma`
/// capturing maximal posterior mass of candidate values.
pub fn bayes_estimator(
    prior: &Prior,
    candidates: &[Candidate],
    loss: &LossFunction,
) -> Result<Estimator, GameError> {
    check_prior(prior, candidates)?;
    let alphabet_len = candidates[0].data.alphabet().len();
    let fill = prior_mean_phi(prior, candidates);
    let mut values = Vec::with_capacity(alphabet_len);
    match loss {
        LossFunction::Squared => {
            for d in 0..alphabet_len {
                let mut m = 0.0;
                let mut s1 = 0.0;
                for (w, c) in prior.weights().iter().zip(candidates) {
                    let l = w * c.likelihood(d);
                    m += l;
                    s1 += l * c.phi_value;
                }
                values.push(if m > 0.0 { s1 / m } else { fill });
            }
        }
        LossFunction::Threshold { gamma } => {
            let groups = phi_groups(candidates);
            for d in 0..alphabet_len {
                let mut masses = vec![0.0; groups.values.len()];
                let mut total = 0.0;
                for ((w, c), &g) in prior.weights().iter().zip(candidates).zip(&groups.group_of)
                {
                    let l = w * c.likelihood(d);
                    masses[g] += l;
                    total += l;
                }
                if total <= 0.0 {
                    values.push(fill);
                } else {
                    values.push(best_window_center(&groups.values, &masses, *gamma));
                }
            }
        }
    }
    Ok(Estimator::Deterministic(values))
}

fn check_prior(prior: &Prior, candidates: &[Candidate]) -> Result<(), GameError> {
    if candidates.is_empty() {
        return Err(GameError::EmptyCandidates);
    }
    if prior.len() != candidates.len() {
        return Err(GameError::LengthMismatch {
            prior: prior.len(),
            candidates: candidates.len(),
        });
    }
    Ok(())
}

struct PhiGroups {
    /// Distinct candidate values, ascending.
    values: Vec<f64>,
    /// Group index of each candidate.
    group_of: Vec<usize>,
}

fn phi_groups(candidates: &[Candidate]) -> PhiGroups {
    let mut keyed: Vec<(i64, f64)> = candidates
        .iter()
        .map(|c| (canonical_key(c.phi_value), c.phi_value))
        .collect();
    keyed.sort_by_key(|&(k, _)| k);
    keyed.dedup_by_key(|&mut (k, _)| k);
    let values: Vec<f64> = keyed.iter().map(|&(_, v)| v).collect();
    let group_of = candidates
        .iter()
        .map(|c| {
            let key = canonical_key(c.phi_value);
            keyed.binary_search_by_key(&key, |&(k, _)| k).unwrap()
        })
        .collect();
    PhiGroups { values, group_of }
}

/// Center of an open interval of length `2 gamma` capturing maximal mass
/// among the (value, mass) groups; ties resolved toward the lowest
/// starting value. A value is captured iff it lies strictly inside, which
/// matches the closed-error convention `|x| >= gamma` of the loss.
fn best_window_center(values: &[f64], masses: &[f64], gamma: f64) -> f64 {
    let n = values.len();
    let mut best_mass = f64::NEG_INFINITY;
    let mut center = values[0];
    let mut j = 0;
    let mut window = 0.0;
    for i in 0..n {
        if j < i {
            j = i;
            window = 0.0;
        }
        while j < n && values[j] - values[i] < 2.0 * gamma {
            window += masses[j];
            j += 1;
        }
        if window > best_mass + 1e-15 {
            best_mass = window;
            center = 0.5 * (values[i] + values[j - 1]);
        }
        window -= masses[i];
    }
    center
}

// ---------------------------------------------------------------------------
// Least favorable priors (squared loss: ascent + equalization polish)
// ---------------------------------------------------------------------------

/// Dense view of the game data used by the inner loops.
struct GameTable {
    /// `like[k][d]`: probability of symbol `d` under candidate `k`.
    like: Vec<Vec<f64>>,
    phi: Vec<f64>,
    alphabet_len: usize,
}

impl GameTable {
    fn new(candidates: &[Candidate]) -> Self {
        let alphabet_len = candidates[0].data.alphabet().len();
        Self {
            like: candidates
                .iter()
                .map(|c| c.data.probabilities().to_vec())
                .collect(),
            phi: candidates.iter().map(|c| c.phi_value).collect(),
            alphabet_len,
        }
    }

    fn n(&self) -> usize {
        self.phi.len()
    }

    /// Posterior means per symbol under `pi` (fill on null symbols), the
    /// marginal, and the Bayes risk `J(pi)`.
    fn bayes_data(&self, pi: &[f64]) -> (Vec<f64>, Vec<f64>, f64) {
        let mut theta = vec![0.0; self.alphabet_len];
        let mut marginal = vec![0.0; self.alphabet_len];
        let fill: f64 = pi.iter().zip(&self.phi).map(|(w, p)| w * p).sum();
        let mut j = 0.0;
        for d in 0..self.alphabet_len {
            let mut m = 0.0;
            let mut s1 = 0.0;
            let mut s2 = 0.0;
            for k in 0..self.n() {
                let l = pi[k] * self.like[k][d];
                if l > 0.0 {
                    m += l;
                    s1 += l * self.phi[k];
                    s2 += l * self.phi[k] * self.phi[k];
                }
            }
            marginal[d] = m;
            if m > 0.0 {
                theta[d] = s1 / m;
                j += s2 - s1 * s1 / m;
            } else {
                theta[d] = fill;
            }
        }
        (theta, marginal, j)
    }

    /// Risk of the estimator `theta` (a per-symbol table) against each
    /// candidate; this is the supergradient of `J` at the prior that
    /// produced `theta`.
    fn risks(&self, theta: &[f64]) -> Vec<f64> {
        (0..self.n())
            .map(|k| {
                let mut r = 0.0;
                for d in 0..self.alphabet_len {
                    let l = self.like[k][d];
                    if l > 0.0 {
                        let e = theta[d] - self.phi[k];
                        r += l * e * e;
                    }
                }
                r
            })
            .collect()
    }
}

/// Result of the least-favorable-prior search.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LfpResult {
    pub prior: Prior,
    pub bayes_risk: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Bayes risk after each accepted ascent step (the polish appends its
    /// final value).
    pub trajectory: Vec<f64>,
}

/// Least favorable prior: approximately maximizes the Bayes risk
/// `pi -> Er(theta_pi, pi)` over the simplex.
pub fn least_favorable_prior(
    candidates: &[Candidate],
    loss: &LossFunction,
    opts: &GameOptions,
) -> Result<LfpResult, GameError> {
    if candidates.is_empty() {
        return Err(GameError::EmptyCandidates);
    }
    match loss {
        LossFunction::Squared => least_favorable_prior_squared(candidates, opts),
        LossFunction::Threshold { .. } => {
            let game = threshold_minimax(candidates, loss, opts)?;
            Ok(LfpResult {
                prior: game.least_favorable_prior,
                bayes_risk: game.maximin_value,
                iterations: game.iterations,
                converged: game.converged,
                trajectory: Vec::new(),
            })
        }
    }
}

fn least_favorable_prior_squared(
    candidates: &[Candidate],
    opts: &GameOptions,
) -> Result<LfpResult, GameError> {
    let table = GameTable::new(candidates);
    let n = table.n();
    if n == 1 {
        return Ok(LfpResult {
            prior: Prior::point_mass(0, 1)?,
            bayes_risk: 0.0,
            iterations: 0,
            converged: true,
            trajectory: vec![0.0],
        });
    }

    // Phase 1: projected supergradient ascent with backtracking.
    let mut pi = vec![1.0 / n as f64; n];
    let (mut theta, _, mut j_cur) = table.bayes_data(&pi);
    let mut trajectory = vec![j_cur];
    let mut step = 1.0;
    let mut iterations = 0;
    let mut converged = false;
    while iterations < opts.max_iters {
        iterations += 1;
        let grad = table.risks(&theta);
        let mut accepted = false;
        let mut t = step;
        for _ in 0..40 {
            let trial: Vec<f64> = pi.iter().zip(&grad).map(|(p, g)| p + t * g).collect();
            let trial = project_simplex(&trial);
            let (theta_t, _, j_t) = table.bayes_data(&trial);
            if j_t > j_cur {
                let moved = trial
                    .iter()
                    .zip(&pi)
                    .map(|(a, b)| (a - b).abs())
                    .fold(0.0f64, f64::max);
                pi = trial;
                theta = theta_t;
                j_cur = j_t;
                trajectory.push(j_cur);
                step = (t * 1.5).min(1e6);
                accepted = true;
                if moved / t <= opts.tol {
                    converged = true;
                }
                break;
            }
            t *= 0.5;
        }
        if !accepted {
            // No ascent direction at any step size: stationary.
            converged = true;
        }
        if converged {
            break;
        }
    }

    // Phase 2: Newton equalization on the active support. At the optimum
    // every supported candidate's risk equals the game value.
    let polished = equalization_polish(&table, &pi, opts);
    if let Some((pi_p, j_p)) = polished {
        if j_p >= j_cur - 1e-12 {
            pi = pi_p;
            j_cur = j_p;
            trajectory.push(j_cur);
        }
    }

    Ok(LfpResult {
        prior: Prior::new(&pi)?,
        bayes_risk: j_cur,
        iterations,
        converged,
        trajectory,
    })
}

/// Solves `r_k(theta_pi) = V` for all supported `k` with `sum pi = 1` by a
/// damped Newton method, adjusting the support actively: candidates whose
/// weight turns negative leave, off-support candidates whose risk exceeds
/// `V` enter.
fn equalization_polish(
    table: &GameTable,
    pi0: &[f64],
    opts: &GameOptions,
) -> Option<(Vec<f64>, f64)> {
    let n = table.n();
    let mut support: Vec<usize> = (0..n).filter(|&k| pi0[k] > 1e-9).collect();
    if support.is_empty() {
        return None;
    }
    let mut best: Option<(Vec<f64>, f64)> = None;

    'active_set: for _round in 0..(2 * n + 4) {
        let s = support.len();
        let mut pi_s: Vec<f64> = support.iter().map(|&k| pi0[k].max(1e-6)).collect();
        let total: f64 = pi_s.iter().sum();
        for w in &mut pi_s {
            *w /= total;
        }

        let full = |pi_s: &[f64]| {
            let mut full = vec![0.0; n];
            for (i, &k) in support.iter().enumerate() {
                full[k] = pi_s[i];
            }
            full
        };

        let (theta, _, j0) = table.bayes_data(&full(&pi_s));
        let mut v = j0;
        let residual = |risks: &[f64], v: f64, pi_s: &[f64]| {
            let mut f = Vec::with_capacity(s + 1);
            for &k in &support {
                f.push(risks[k] - v);
            }
            f.push(pi_s.iter().sum::<f64>() - 1.0);
            f
        };
        let norm_inf = |f: &[f64]| f.iter().map(|x| x.abs()).fold(0.0f64, f64::max);

        let mut f = residual(&table.risks(&theta), v, &pi_s);
        for _newton in 0..60 {
            if norm_inf(&f) <= 1e-13 {
                break;
            }
            // Jacobian: d r_k / d pi_j = -2 H_kj on the support,
            // H_kj = sum_d L_kd L_jd (phi_k - theta_d)(phi_j - theta_d) / m_d.
            let pi_full = full(&pi_s);
            let (theta_now, marginal, _) = table.bayes_data(&pi_full);
            let mut a = vec![vec![0.0; s + 1]; s + 1];
            for d in 0..table.alphabet_len {
                let m = marginal[d];
                if m <= 1e-300 {
                    continue;
                }
                for (i, &ki) in support.iter().enumerate() {
                    let vi = table.like[ki][d] * (table.phi[ki] - theta_now[d]);
                    if vi == 0.0 {
                        continue;
                    }
                    for (jj, &kj) in support.iter().enumerate() {
                        let vj = table.like[kj][d] * (table.phi[kj] - theta_now[d]);
                        a[i][jj] += -2.0 * vi * vj / m;
                    }
                }
            }
            for i in 0..s {
                a[i][s] = -1.0; // d/dV
                a[s][i] = 1.0; // mass row
            }
            a[s][s] = 0.0;
            // Light Tikhonov regularization keeps duplicate candidates from
            // making the system exactly singular.
            for i in 0..s {
                a[i][i] -= 1e-12;
            }
            let rhs: Vec<f64> = f.iter().map(|x| -x).collect();
            let Some(delta) = solve_linear(&a, &rhs) else {
                break;
            };
            // Damped update.
            let mut alpha = 1.0;
            let mut improved = false;
            for _ in 0..30 {
                let mut trial: Vec<f64> = pi_s
                    .iter()
                    .zip(&delta[..s])
                    .map(|(p, d)| p + alpha * d)
                    .collect();
                let v_trial = v + alpha * delta[s];
                // Keep weights representable; genuine sign changes are
                // handled by support updates below.
                for w in &mut trial {
                    *w = w.max(-1e-3);
                }
                let pi_trial_full = full(&trial.iter().map(|&w| w.max(0.0)).collect::<Vec<_>>());
                let mass: f64 = pi_trial_full.iter().sum();
                if mass <= 0.0 {
                    alpha *= 0.5;
                    continue;
                }
                let (theta_t, _, _) = table.bayes_data(
                    &pi_trial_full.iter().map(|&w| w / mass).collect::<Vec<_>>(),
                );
                let risks_t = table.risks(&theta_t);
                let f_t = residual(&risks_t, v_trial, &trial);
                if norm_inf(&f_t) < norm_inf(&f) {
                    pi_s = trial;
                    v = v_trial;
                    f = f_t;
                    improved = true;
                    break;
                }
                alpha *= 0.5;
            }
            if !improved {
                break;
            }
        }

        // Support management.
        if let Some((i, _)) = pi_s
            .iter()
            .enumerate()
            .filter(|(_, &w)| w < -1e-10)
            .min_by(|a, b| a.1.partial_cmp(b.1).unwrap())
        {
            support.remove(i);
            if support.is_empty() {
                return best;
            }
            continue 'active_set;
        }
        let pi_clipped: Vec<f64> = pi_s.iter().map(|&w| w.max(0.0)).collect();
        let mass: f64 = pi_clipped.iter().sum();
        if mass <= 0.0 {
            return best;
        }
        let pi_final = full(&pi_clipped.iter().map(|&w| w / mass).collect::<Vec<_>>());
        let (theta_f, _, j_f) = table.bayes_data(&pi_final);
        let risks_f = table.risks(&theta_f);
        match &best {
            Some((_, jb)) if *jb >= j_f => {}
            _ => best = Some((pi_final.clone(), j_f)),
        }
        // Off-support entry: a candidate beating the equalized value would
        // raise the Bayes risk.
        let mut worst: Option<(usize, f64)> = None;
        for k in 0..n {
            if support.contains(&k) {
                continue;
            }
            let excess = risks_f[k] - j_f;
            if excess > opts.tol.max(1e-10) {
                match worst {
                    Some((_, e)) if e >= excess => {}
                    _ => worst = Some((k, excess)),
                }
            }
        }
        match worst {
            Some((k, _)) => {
                support.push(k);
                support.sort_unstable();
            }
            None => break,
        }
    }
    best
}

// ---------------------------------------------------------------------------
// Minimax estimators
// ---------------------------------------------------------------------------

/// Solves the minimax estimation game for the given loss, returning the
/// estimator, the least favorable prior, and the duality certificate.
pub fn minimax_estimator(
    candidates: &[Candidate],
    loss: &LossFunction,
    opts: &GameOptions,
) -> Result<GameSolution, GameError> {
    if candidates.is_empty() {
        return Err(GameError::EmptyCandidates);
    }
    match loss {
        LossFunction::Squared => {
            let lfp = least_favorable_prior_squared(candidates, opts)?;
            let estimator = bayes_estimator(&lfp.prior, candidates, loss)?;
            let (minimax_value, _) = worst_case_error(&estimator, candidates, loss)?;
            let maximin_value = averaged_risk(&estimator, &lfp.prior, candidates, loss)?;
            Ok(GameSolution {
                estimator,
                least_favorable_prior: lfp.prior,
                minimax_value,
                maximin_value,
                duality_gap: minimax_value - maximin_value,
                iterations: lfp.iterations,
                converged: lfp.converged,
                deterministic_estimator: None,
                deterministic_value: None,
                ascent_trajectory: lfp.trajectory,
            })
        }
        LossFunction::Threshold { .. } => threshold_minimax(candidates, loss, opts),
    }
}

/// Double oracle for the threshold-loss game. Pure strategies are
/// deterministic estimators (statistician) and candidate indices
/// (nature); the restricted game is solved exactly by a linear program,
/// and each side's best response is computed against the other's mixture
/// over the full strategy space. Terminates when neither side can improve
/// by more than the tolerance.
pub fn threshold_minimax(
    candidates: &[Candidate],
    loss: &LossFunction,
    opts: &GameOptions,
) -> Result<GameSolution, GameError> {
    let n = candidates.len();
    let uniform = Prior::uniform(n);
    let theta0 = bayes_estimator(&uniform, candidates, loss)?;
    let mut pool: Vec<Vec<f64>> = vec![deterministic_values(&theta0)?];
    // Risk vector over all candidates, one per pooled estimator.
    let mut pool_risks: Vec<Vec<f64>> = vec![risk_vector(&pool[0], candidates, loss)?];
    let first_worst = argmax(&pool_risks[0]);
    let mut nature: Vec<usize> = vec![first_worst.0];

    let mut iterations = 0;
    let mut converged = false;
    let mut estimator_mix: Vec<f64> = vec![1.0];
    let mut prior_full = vec![0.0; n];
    prior_full[nature[0]] = 1.0;

    while iterations < opts.max_iters.max(1) {
        iterations += 1;
        // Restricted game: rows = nature (maximizer), cols = estimators.
        let matrix: Vec<Vec<f64>> = nature
            .iter()
            .map(|&k| pool_risks.iter().map(|r| r[k]).collect())
            .collect();
        let lp = solve_matrix_game(&matrix).map_err(GameError::LpFailure)?;
        let value = lp.value;
        estimator_mix = lp.col_strategy.clone();

        // Nature's best response to the estimator mixture (full list).
        let mut mixed_risk = vec![0.0; n];
        for (q, risks) in estimator_mix.iter().zip(&pool_risks) {
            if *q == 0.0 {
                continue;
            }
            for k in 0..n {
                mixed_risk[k] += q * risks[k];
            }
        }
        let (k_star, v_up) = argmax(&mixed_risk);

        // Statistician's best response to the nature mixture (full class).
        prior_full = vec![0.0; n];
        for (p, &k) in lp.row_strategy.iter().zip(&nature) {
            prior_full[k] = *p;
        }
        let prior = Prior::new(&prior_full)?;
        let theta_br = bayes_estimator(&prior, candidates, loss)?;
        let br_values = deterministic_values(&theta_br)?;
        let br_risks = risk_vector(&br_values, candidates, loss)?;
        let r_star: f64 = prior_full
            .iter()
            .zip(&br_risks)
            .map(|(p, r)| p * r)
            .sum();

        let mut advanced = false;
        if v_up > value + opts.tol && !nature.contains(&k_star) {
            nature.push(k_star);
            advanced = true;
        }
        if r_star < value - opts.tol && !pool_contains(&pool, &br_values) {
            pool.push(br_values);
            pool_risks.push(br_risks);
            advanced = true;
        }
        if !advanced {
            converged = v_up <= value + opts.tol && r_star >= value - opts.tol;
            break;
        }
    }

    // Mixed estimator over the pooled deterministic tables.
    let estimator = mix_to_estimator(&pool, &estimator_mix);
    let (minimax_value, _) = match &estimator {
        Estimator::Deterministic(v) => {
            let r = risk_vector(v, candidates, loss)?;
            let (k, v_max) = argmax(&r);
            ((v_max), k)
        }
        _ => {
            let mut mixed_risk = vec![0.0; n];
            for (q, risks) in estimator_mix.iter().zip(&pool_risks) {
                for k in 0..n {
                    mixed_risk[k] += q * risks[k];
                }
            }
            let (k, v_max) = argmax(&mixed_risk);
            (v_max, k)
        }
    };

    // Deterministic rounding: best single pooled estimator.
    let mut det_idx = 0;
    let mut det_value = f64::INFINITY;
    for (j, risks) in pool_risks.iter().enumerate() {
        let (_, v) = argmax(risks);
        if v < det_value - 1e-15 {
            det_value = v;
            det_idx = j;
        }
    }
    let deterministic_estimator = Estimator::Deterministic(pool[det_idx].clone());

    let prior = Prior::new(&prior_full)?;
    let maximin_value = {
        let theta_br = bayes_estimator(&prior, candidates, loss)?;
        averaged_risk(&theta_br, &prior, candidates, loss)?
    };

    Ok(GameSolution {
        estimator,
        least_favorable_prior: prior,
        minimax_value,
        maximin_value,
        duality_gap: minimax_value - maximin_value,
        iterations,
        converged,
        deterministic_estimator: Some(deterministic_estimator),
        deterministic_value: Some(det_value),
        ascent_trajectory: Vec::new(),
    })
}

fn deterministic_values(theta: &Estimator) -> Result<Vec<f64>, GameError> {
    match theta {
        Estimator::Deterministic(v) => Ok(v.clone()),
        Estimator::Randomized { .. } => Err(GameError::RandomizedUnsupported),
    }
}

fn risk_vector(
    values: &[f64],
    candidates: &[Candidate],
    loss: &LossFunction,
) -> Result<Vec<f64>, GameError> {
    let theta = Estimator::Deterministic(values.to_vec());
    candidates
        .iter()
        .map(|c| statistical_error(&theta, c, loss).map_err(GameError::from))
        .collect()
}

fn argmax(v: &[f64]) -> (usize, f64) {
    let mut arg = 0;
    let mut best = f64::NEG_INFINITY;
    for (i, &x) in v.iter().enumerate() {
        if x > best {
            best = x;
            arg = i;
        }
    }
    (arg, best)
}

fn pool_contains(pool: &[Vec<f64>], values: &[f64]) -> bool {
    pool.iter().any(|p| {
        p.len() == values.len()
            && p.iter()
                .zip(values)
                .all(|(a, b)| (a - b).abs() <= 1e-12)
    })
}

/// Collapses a mixture over deterministic tables into an [`Estimator`]:
/// deterministic when one table carries every mass, a row-stochastic
/// kernel over the union of decision values otherwise.
fn mix_to_estimator(pool: &[Vec<f64>], mix: &[f64]) -> Estimator {
    let active: Vec<usize> = mix
        .iter()
        .enumerate()
        .filter(|(_, &q)| q > 1e-12)
        .map(|(j, _)| j)
        .collect();
    if active.len() == 1 {
        return Estimator::Deterministic(pool[active[0]].clone());
    }
    let alphabet_len = pool[0].len();
    let mut decisions: Vec<f64> = Vec::new();
    for &j in &active {
        for &v in &pool[j] {
            decisions.push(v);
        }
    }
    decisions.sort_by(|a, b| a.partial_cmp(b).unwrap());
    decisions.dedup_by(|a, b| canonical_key(*a) == canonical_key(*b));
    let mut kernel = vec![vec![0.0; decisions.len()]; alphabet_len];
    for &j in &active {
        for d in 0..alphabet_len {
            let key = canonical_key(pool[j][d]);
            let pos = decisions
                .binary_search_by(|x| canonical_key(*x).cmp(&key))
                .unwrap();
            kernel[d][pos] += mix[j];
        }
    }
    // Normalize away the mass dropped by the active-strategy cutoff.
    for row in &mut kernel {
        let s: f64 = row.iter().sum();
        if s > 0.0 {
            for x in row.iter_mut() {
                *x /= s;
            }
        }
    }
    Estimator::Randomized { kernel, decisions }
}

// ---------------------------------------------------------------------------
// Experiment ordering
// ---------------------------------------------------------------------------

/// Preference between two data maps by their minimax game values.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ExperimentOrder {
    FirstPreferable,
    SecondPreferable,
    Equivalent,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExperimentComparison {
    pub order: ExperimentOrder,
    pub first_value: f64,
    pub second_value: f64,
}

/// Orders two experiments (data maps) over the same candidate family:
/// the one whose minimax risk is smaller is preferable. The induced order
/// is transitive and total but not antisymmetric; values within `1e-9`
/// are reported equivalent.
pub fn compare_experiments(
    family: &CandidateFamily,
    map1: &DataMap,
    map2: &DataMap,
    loss: &LossFunction,
    opts: &GameOptions,
) -> Result<ExperimentComparison, GameError> {
    let c1 = family.with_data_map(map1)?;
    let c2 = family.with_data_map(map2)?;
    let v1 = minimax_estimator(&c1, loss, opts)?.minimax_value;
    let v2 = minimax_estimator(&c2, loss, opts)?.minimax_value;
    let order = if (v1 - v2).abs() <= 1e-9 {
        ExperimentOrder::Equivalent
    } else if v1 < v2 {
        ExperimentOrder::FirstPreferable
    } else {
        ExperimentOrder::SecondPreferable
    };
    Ok(ExperimentComparison {
        order,
        first_value: v1,
        second_value: v2,
    })
}

// ---------------------------------------------------------------------------
// Estimator mixing
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MixResult {
    pub alpha: Vec<f64>,
    pub value: f64,
    /// Worst-case risk of each input estimator on its own.
    pub vertex_values: Vec<f64>,
}

/// Optimal convex mixture `sum alpha_i theta_i` minimizing the worst-case
/// risk. Requires a convex loss (squared); the objective is then convex in
/// `alpha`, and the simplex search below starts at the best vertex, so
/// mixing can only improve on the best single estimator.
pub fn mix_estimators(
    thetas: &[Estimator],
    candidates: &[Candidate],
    loss: &LossFunction,
    opts: &GameOptions,
) -> Result<MixResult, GameError> {
    if thetas.is_empty() {
        return Err(GameError::EmptyCandidates);
    }
    if !loss.is_convex() {
        return Err(GameError::NonConvexLoss);
    }
    let tables: Vec<Vec<f64>> = thetas
        .iter()
        .map(deterministic_values)
        .collect::<Result<_, _>>()?;
    let m = tables.len();
    let alphabet_len = tables[0].len();

    let eval = |alpha: &[f64]| -> Result<f64, GameError> {
        let mut combo = vec![0.0; alphabet_len];
        for (a, t) in alpha.iter().zip(&tables) {
            for (c, v) in combo.iter_mut().zip(t) {
                *c += a * v;
            }
        }
        let r = risk_vector(&combo, candidates, loss)?;
        Ok(argmax(&r).1)
    };

    let mut vertex_values = Vec::with_capacity(m);
    for i in 0..m {
        let mut alpha = vec![0.0; m];
        alpha[i] = 1.0;
        vertex_values.push(eval(&alpha)?);
    }
    let best_vertex = vertex_values
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.partial_cmp(b.1).unwrap())
        .map(|(i, _)| i)
        .unwrap();

    if m == 1 {
        return Ok(MixResult {
            alpha: vec![1.0],
            value: vertex_values[0],
            vertex_values,
        });
    }

    // Pattern search on the simplex starting from the best vertex;
    // monotone by construction, so the mixture never loses to a vertex.
    let mut alpha = vec![0.0; m];
    alpha[best_vertex] = 1.0;
    let mut value = vertex_values[best_vertex];
    // The uniform mixture is a useful second start.
    let uniform = vec![1.0 / m as f64; m];
    let v_uniform = eval(&uniform)?;
    if v_uniform < value {
        alpha = uniform;
        value = v_uniform;
    }
    let mut step = 0.25;
    let mut sweeps = 0;
    while step > 1e-12 && sweeps < opts.max_iters {
        sweeps += 1;
        let mut improved = false;
        for i in 0..m {
            for dir in [1.0, -1.0] {
                let mut raw = alpha.clone();
                raw[i] += dir * step;
                let trial = project_simplex(&raw);
                let v = eval(&trial)?;
                if v < value - 1e-15 {
                    value = v;
                    alpha = trial;
                    improved = true;
                }
            }
        }
        if !improved {
            step *= 0.5;
        }
    }

    Ok(MixResult {
        alpha,
        value,
        vertex_values,
    })
}

// ---------------------------------------------------------------------------
// Matrix game linear program
// ---------------------------------------------------------------------------

pub(crate) struct MatrixGameSolution {
    pub value: f64,
    /// Mixed strategy of the row player (maximizer).
    pub row_strategy: Vec<f64>,
    /// Mixed strategy of the column player (minimizer).
    pub col_strategy: Vec<f64>,
}

/// Solves the zero-sum matrix game `max_row min_col row' A col` exactly by
/// the classical linear-programming reduction, with Bland's lowest-index
/// pivoting (deterministic, cycle-free).
pub(crate) fn solve_matrix_game(a: &[Vec<f64>]) -> Result<MatrixGameSolution, String> {
    let m = a.len();
    if m == 0 {
        return Err("empty game".into());
    }
    let n = a[0].len();
    if n == 0 || a.iter().any(|row| row.len() != n) {
        return Err("ragged or empty payoff matrix".into());
    }
    let min = a
        .iter()
        .flat_map(|r| r.iter())
        .fold(f64::INFINITY, |acc, &x| acc.min(x));
    let shift = 1.0 - min;
    // Column player's LP on the shifted matrix A' = A + shift (> 0):
    // maximize sum(y) subject to, for every row i, sum_j A'[i][j] y_j <= 1.
    // Then value' = 1 / sum(y); the row player's mix comes from the duals.
    let mut tableau = vec![vec![0.0; n + m + 1]; m];
    for (i, row) in a.iter().enumerate() {
        for j in 0..n {
            tableau[i][j] = row[j] + shift;
        }
        tableau[i][n + i] = 1.0;
        tableau[i][n + m] = 1.0;
    }
    let mut cost = vec![0.0; n + m];
    for c in cost.iter_mut().take(n) {
        *c = -1.0;
    }
    let mut basis: Vec<usize> = (n..n + m).collect();

    for _pivot in 0..10_000 {
        // Bland: lowest-index column with negative reduced cost.
        let Some(enter) = (0..n + m).find(|&j| cost[j] < -1e-12) else {
            break;
        };
        // Ratio test, ties to the lowest basis index.
        let mut leave: Option<usize> = None;
        let mut best_ratio = f64::INFINITY;
        for (r, row) in tableau.iter().enumerate() {
            if row[enter] > 1e-12 {
                let ratio = row[n + m] / row[enter];
                let better = ratio < best_ratio - 1e-15
                    || ((ratio - best_ratio).abs() <= 1e-15
                        && leave.map(|l| basis[r] < basis[l]).unwrap_or(true));
                if better {
                    best_ratio = ratio;
                    leave = Some(r);
                }
            }
        }
        let Some(leave) = leave else {
            return Err("unbounded matrix-game LP".into());
        };
        // Pivot.
        let piv = tableau[leave][enter];
        for x in tableau[leave].iter_mut() {
            *x /= piv;
        }
        for r in 0..m {
            if r == leave {
                continue;
            }
            let factor = tableau[r][enter];
            if factor == 0.0 {
                continue;
            }
            for c in 0..=(n + m) {
                tableau[r][c] -= factor * tableau[leave][c];
            }
        }
        let factor = cost[enter];
        if factor != 0.0 {
            for c in 0..(n + m) {
                cost[c] -= factor * tableau[leave][c];
            }
        }
        basis[leave] = enter;
    }

    let mut y = vec![0.0; n];
    for (r, &b) in basis.iter().enumerate() {
        if b < n {
            y[b] = tableau[r][n + m];
        }
    }
    let sum_y: f64 = y.iter().sum();
    if sum_y <= 0.0 {
        return Err("degenerate matrix-game LP solution".into());
    }
    let value_shifted = 1.0 / sum_y;
    let col_strategy: Vec<f64> = y.iter().map(|&yj| yj * value_shifted).collect();
    // Row player's mix: duals, read off the slack columns' reduced costs.
    let mut x = vec![0.0; m];
    for i in 0..m {
        x[i] = cost[n + i].max(0.0);
    }
    let sum_x: f64 = x.iter().sum();
    let row_strategy: Vec<f64> = if sum_x > 0.0 {
        x.iter().map(|&xi| xi / sum_x).collect()
    } else {
        vec![1.0 / m as f64; m]
    };
    Ok(MatrixGameSolution {
        value: value_shifted - shift,
        row_strategy,
        col_strategy,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::risk::{shared_alphabet, CandidateFamily, DataMap};

    fn bernoulli_candidates(ps: &[f64], n: usize) -> Vec<Candidate> {
        CandidateFamily::bernoulli_grid(ps)
            .unwrap()
            .with_data_map(&DataMap::iid(n))
            .unwrap()
    }

    #[test]
    fn matrix_game_matching_pennies() {
        let a = vec![vec![1.0, -1.0], vec![-1.0, 1.0]];
        let sol = solve_matrix_game(&a).unwrap();
        assert!(sol.value.abs() < 1e-12);
        assert!((sol.row_strategy[0] - 0.5).abs() < 1e-12);
        assert!((sol.col_strategy[0] - 0.5).abs() < 1e-12);
    }

    #[test]
    fn matrix_game_with_dominant_row() {
        let a = vec![vec![3.0, 2.0], vec![1.0, 0.0]];
        let sol = solve_matrix_game(&a).unwrap();
        assert!((sol.value - 2.0).abs() < 1e-12);
        assert!((sol.row_strategy[0] - 1.0).abs() < 1e-12);
        assert!((sol.col_strategy[1] - 1.0).abs() < 1e-12);
    }

    /// Equilibrium property: the returned mixes certify the value from
    /// both sides.
    fn assert_equilibrium(a: &[Vec<f64>]) {
        let sol = solve_matrix_game(a).unwrap();
        let m = a.len();
        let n = a[0].len();
        for j in 0..n {
            let payoff: f64 = (0..m).map(|i| sol.row_strategy[i] * a[i][j]).sum();
            assert!(payoff >= sol.value - 1e-9, "column {j} undercuts the value");
        }
        for (i, row) in a.iter().enumerate() {
            let payoff: f64 = (0..n).map(|j| sol.col_strategy[j] * row[j]).sum();
            assert!(payoff <= sol.value + 1e-9, "row {i} beats the value");
        }
    }

    #[test]
    fn matrix_game_equilibria() {
        assert_equilibrium(&[vec![0.0, 1.0, -1.0], vec![-1.0, 0.0, 1.0], vec![1.0, -1.0, 0.0]]);
        assert_equilibrium(&[vec![0.0, 2.0, -1.0], vec![-1.0, 0.0, 1.0], vec![1.0, -1.0, 0.0]]);
        assert_equilibrium(&[vec![4.0, -2.0, 3.5], vec![-1.0, 2.0, 0.5]]);
        // Seeded random matrices.
        let mut state = 0x2545F491u64;
        let mut next = || {
            state ^= state << 13;
            state ^= state >> 7;
            state ^= state << 17;
            (state % 2000) as f64 / 100.0 - 10.0
        };
        for (rows, cols) in [(2, 2), (3, 4), (5, 3), (6, 6)] {
            let a: Vec<Vec<f64>> = (0..rows)
                .map(|_| (0..cols).map(|_| next()).collect())
                .collect();
            assert_equilibrium(&a);
        }
    }

    #[test]
    fn bayes_on_separating_candidates_reads_off_truth() {
        let cands = bernoulli_candidates(&[0.0, 1.0], 1);
        let theta = bayes_estimator(&Prior::uniform(2), &cands, &LossFunction::Squared).unwrap();
        let alphabet = shared_alphabet(&cands).unwrap();
        let values = match &theta {
            Estimator::Deterministic(v) => v.clone(),
            _ => unreachable!(),
        };
        for (sym, v) in alphabet.symbols().iter().zip(&values) {
            assert!((sym.sample_mean() - v).abs() < 1e-12);
        }
    }

    #[test]
    fn bayes_two_bernoullis_hand_computed() {
        // Uniform prior on {Bernoulli(0.25), Bernoulli(0.75)}, one sample.
        // theta(1) = (0.5*0.25*0.25 + 0.5*0.75*0.75) / 0.5 = 0.625,
        // theta(0) symmetric = 0.375.
        let cands = bernoulli_candidates(&[0.25, 0.75], 1);
        let theta = bayes_estimator(&Prior::uniform(2), &cands, &LossFunction::Squared).unwrap();
        let Estimator::Deterministic(v) = &theta else {
            unreachable!()
        };
        // Alphabet sorted: {0} then {1}.
        assert!((v[0] - 0.375).abs() < 1e-12);
        assert!((v[1] - 0.625).abs() < 1e-12);
    }

    #[test]
    fn bayes_single_candidate_is_constant_truth() {
        let cands = bernoulli_candidates(&[0.3], 2);
        let theta =
            bayes_estimator(&Prior::uniform(1), &cands, &LossFunction::Squared).unwrap();
        let Estimator::Deterministic(v) = &theta else {
            unreachable!()
        };
        for x in v {
            assert!((x - 0.3).abs() < 1e-12);
        }
    }

    #[test]
    fn lfp_identifiable_family_has_zero_risk() {
        let cands = bernoulli_candidates(&[0.0, 1.0], 1);
        let lfp =
            least_favorable_prior(&cands, &LossFunction::Squared, &GameOptions::default())
                .unwrap();
        assert!(lfp.bayes_risk.abs() < 1e-12);
    }

    #[test]
    fn lfp_symmetric_pair_is_uniform() {
        let cands = bernoulli_candidates(&[0.25, 0.75], 1);
        let opts = GameOptions::default();
        let lfp = least_favorable_prior(&cands, &LossFunction::Squared, &opts).unwrap();
        assert!(
            (lfp.prior.weights()[0] - 0.5).abs() < 1e-6,
            "prior = {:?}",
            lfp.prior
        );
        // Sweep oracle: the Bayes risk over priors (q, 1-q) peaks at 0.5.
        let table = GameTable::new(&cands);
        let mut best_q = 0.0;
        let mut best_j = f64::NEG_INFINITY;
        for i in 0..=1000 {
            let q = i as f64 / 1000.0;
            let (_, _, j) = table.bayes_data(&[q, 1.0 - q]);
            if j > best_j {
                best_j = j;
                best_q = q;
            }
        }
        assert!((best_q - 0.5).abs() < 1e-9);
        assert!((lfp.bayes_risk - best_j).abs() < 1e-9);
    }

    #[test]
    fn minimax_identifiable_family_is_exact() {
        let cands = bernoulli_candidates(&[0.0, 1.0], 1);
        let sol =
            minimax_estimator(&cands, &LossFunction::Squared, &GameOptions::default()).unwrap();
        assert!(sol.minimax_value.abs() < 1e-12);
        assert!(sol.duality_gap.abs() < 1e-12);
    }

    #[test]
    fn minimax_no_data_is_chebyshev_center() {
        // Single constant symbol: the best estimator is the midpoint of
        // the value range, its worst risk the squared half-range.
        let family = CandidateFamily::bernoulli_grid(&[0.1, 0.4, 0.9]).unwrap();
        let g = crate::grid::GridFn::constant(&[0.0, 1.0], 0.0).unwrap();
        let cands = family.with_data_map(&DataMap::coarse(g, 1)).unwrap();
        let sol =
            minimax_estimator(&cands, &LossFunction::Squared, &GameOptions::default()).unwrap();
        let Estimator::Deterministic(v) = &sol.estimator else {
            unreachable!()
        };
        assert!((v[0] - 0.5).abs() < 1e-7, "theta = {}", v[0]);
        assert!((sol.minimax_value - 0.16).abs() < 1e-7);
        assert!(sol.duality_gap.abs() < 1e-7);
    }

    #[test]
    fn minimax_bernoulli_pair_duality() {
        let cands = bernoulli_candidates(&[0.25, 0.75], 1);
        let sol =
            minimax_estimator(&cands, &LossFunction::Squared, &GameOptions::default()).unwrap();
        assert!(sol.maximin_value <= sol.minimax_value + 1e-12);
        assert!(sol.duality_gap <= 1e-8, "gap = {}", sol.duality_gap);
    }

    #[test]
    fn minimax_bernoulli_grid_duality() {
        let ps: Vec<f64> = (0..=10).map(|i| i as f64 / 10.0).collect();
        let cands = bernoulli_candidates(&ps, 2);
        let sol =
            minimax_estimator(&cands, &LossFunction::Squared, &GameOptions::default()).unwrap();
        assert!(sol.duality_gap >= -1e-12);
        assert!(sol.duality_gap <= 1e-6, "gap = {}", sol.duality_gap);
    }

    #[test]
    fn threshold_game_identifiable_is_zero() {
        let cands = bernoulli_candidates(&[0.0, 1.0], 1);
        let loss = LossFunction::threshold(0.1).unwrap();
        let sol = threshold_minimax(&cands, &loss, &GameOptions::default()).unwrap();
        assert!(sol.minimax_value.abs() < 1e-12);
        assert!(sol.deterministic_value.unwrap().abs() < 1e-12);
    }

    #[test]
    fn threshold_game_no_data_small_gamma() {
        // Two candidates, no data, tiny gamma: any deterministic estimator
        // misses one candidate surely; mixing halves the worst risk.
        let family = CandidateFamily::bernoulli_grid(&[0.0, 1.0]).unwrap();
        let g = crate::grid::GridFn::constant(&[0.0, 1.0], 0.0).unwrap();
        let cands = family.with_data_map(&DataMap::coarse(g, 1)).unwrap();
        let loss = LossFunction::threshold(0.05).unwrap();
        let sol = threshold_minimax(&cands, &loss, &GameOptions::default()).unwrap();
        assert!((sol.deterministic_value.unwrap() - 1.0).abs() < 1e-12);
        assert!((sol.minimax_value - 0.5).abs() < 1e-9);
    }

    #[test]
    fn threshold_game_wide_gamma_is_free() {
        let family = CandidateFamily::bernoulli_grid(&[0.2, 0.8]).unwrap();
        let g = crate::grid::GridFn::constant(&[0.0, 1.0], 0.0).unwrap();
        let cands = family.with_data_map(&DataMap::coarse(g, 1)).unwrap();
        // Range is 0.6; gamma above half-range lets the midpoint win.
        let loss = LossFunction::threshold(0.4).unwrap();
        let sol = threshold_minimax(&cands, &loss, &GameOptions::default()).unwrap();
        assert!(sol.deterministic_value.unwrap().abs() < 1e-12);
    }

    #[test]
    fn more_samples_are_preferable() {
        let family = CandidateFamily::bernoulli_grid(&[0.2, 0.4, 0.6, 0.8]).unwrap();
        let cmp = compare_experiments(
            &family,
            &DataMap::iid(1),
            &DataMap::iid(2),
            &LossFunction::Squared,
            &GameOptions::default(),
        )
        .unwrap();
        assert_eq!(cmp.order, ExperimentOrder::SecondPreferable);
    }

    #[test]
    fn identical_maps_are_equivalent() {
        let family = CandidateFamily::bernoulli_grid(&[0.3, 0.7]).unwrap();
        let cmp = compare_experiments(
            &family,
            &DataMap::iid(2),
            &DataMap::iid(2),
            &LossFunction::Squared,
            &GameOptions::default(),
        )
        .unwrap();
        assert_eq!(cmp.order, ExperimentOrder::Equivalent);
    }

    #[test]
    fn constant_observation_is_never_preferable() {
        let family = CandidateFamily::bernoulli_grid(&[0.1, 0.5, 0.9]).unwrap();
        let g = crate::grid::GridFn::constant(&[0.0, 1.0], 0.7).unwrap();
        let cmp = compare_experiments(
            &family,
            &DataMap::coarse(g, 1),
            &DataMap::iid(1),
            &LossFunction::Squared,
            &GameOptions::default(),
        )
        .unwrap();
        assert_ne!(cmp.order, ExperimentOrder::FirstPreferable);
        // The constant map carries the no-data (Chebyshev-center) value.
        assert!((cmp.first_value - 0.16).abs() < 1e-7);
    }

    #[test]
    fn mixing_single_estimator_is_identity() {
        let cands = bernoulli_candidates(&[0.2, 0.8], 1);
        let alphabet_len = cands[0].data.alphabet().len();
        let theta = Estimator::constant(0.5, alphabet_len);
        let res = mix_estimators(
            &[theta.clone()],
            &cands,
            &LossFunction::Squared,
            &GameOptions::default(),
        )
        .unwrap();
        assert_eq!(res.alpha, vec![1.0]);
        let (w, _) = worst_case_error(&theta, &cands, &LossFunction::Squared).unwrap();
        assert!((res.value - w).abs() < 1e-15);
    }

    #[test]
    fn mixing_duplicates_changes_nothing() {
        let cands = bernoulli_candidates(&[0.2, 0.8], 1);
        let alphabet_len = cands[0].data.alphabet().len();
        let theta = Estimator::constant(0.4, alphabet_len);
        let res = mix_estimators(
            &[theta.clone(), theta.clone()],
            &cands,
            &LossFunction::Squared,
            &GameOptions::default(),
        )
        .unwrap();
        let (w, _) = worst_case_error(&theta, &cands, &LossFunction::Squared).unwrap();
        assert!((res.value - w).abs() < 1e-12);
    }

    #[test]
    fn symmetric_biases_mix_to_half() {
        // Sample mean shifted up and down by the same amount on a
        // symmetric family: the balanced mixture cancels the bias.
        let cands = bernoulli_candidates(&[0.25, 0.5, 0.75], 2);
        let alphabet = shared_alphabet(&cands).unwrap();
        let bias = 0.2;
        let up = Estimator::Deterministic(
            alphabet.symbols().iter().map(|s| s.sample_mean() + bias).collect(),
        );
        let down = Estimator::Deterministic(
            alphabet.symbols().iter().map(|s| s.sample_mean() - bias).collect(),
        );
        let res = mix_estimators(
            &[up, down],
            &cands,
            &LossFunction::Squared,
            &GameOptions::default(),
        )
        .unwrap();
        assert!(
            (res.alpha[0] - 0.5).abs() < 1e-3,
            "alpha = {:?}",
            res.alpha
        );
        assert!(res.value < res.vertex_values[0] - 1e-3);
        assert!(res.value < res.vertex_values[1] - 1e-3);
    }

    #[test]
    fn mixing_rejects_threshold_loss() {
        let cands = bernoulli_candidates(&[0.2, 0.8], 1);
        let theta = Estimator::constant(0.5, cands[0].data.alphabet().len());
        let loss = LossFunction::threshold(0.2).unwrap();
        assert!(matches!(
            mix_estimators(&[theta], &cands, &loss, &GameOptions::default()),
            Err(GameError::NonConvexLoss)
        ));
    }
}
