//! Independent brute-force oracles cross-checking the solvers through
//! code paths they do not share: dense grid enumeration for the bound
//! solver, exhaustive estimator lattices and full matrix games for the
//! decision-game solvers.

use ouq_core::admissible::{AdmissibleSet, MomentConstraint, Relation};
use ouq_core::game::{
    bayes_estimator, least_favorable_prior, minimax_estimator, threshold_minimax, GameOptions,
    Prior,
};
use ouq_core::grid::{GridFn, Interval};
use ouq_core::measure::QuantityOfInterest;
use ouq_core::risk::{
    averaged_risk, statistical_error, worst_case_error, Candidate, CandidateFamily, DataMap,
    Estimator, LossFunction,
};
use ouq_core::solver::{lower_bound, markov_oracle, upper_bound, SolverOptions};

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn id01() -> GridFn {
    GridFn::identity(&[0.0, 1.0]).unwrap()
}

fn mean_set(relation: Relation, bound: f64) -> AdmissibleSet {
    AdmissibleSet::new(
        Interval::unit(),
        vec![MomentConstraint::new(id01(), relation, bound).unwrap()],
        None,
        vec![0.0, 0.5, 1.0],
    )
    .unwrap()
}

/// Dense two-atom grid enumeration of `mu[X >= a]` under a single mean
/// constraint: positions on a uniform grid, weights on a uniform lattice,
/// feasibility checked directly. Entirely independent of the solver's
/// linear-programming path.
fn two_atom_grid_search(
    relation: Relation,
    bound: f64,
    threshold: f64,
    maximize: bool,
    grid_n: usize,
    weight_n: usize,
) -> f64 {
    let mut best = if maximize {
        f64::NEG_INFINITY
    } else {
        f64::INFINITY
    };
    for i in 0..=grid_n {
        let x0 = i as f64 / grid_n as f64;
        for j in 0..=grid_n {
            let x1 = j as f64 / grid_n as f64;
            for t in 0..=weight_n {
                let w1 = t as f64 / weight_n as f64;
                let mean = (1.0 - w1) * x0 + w1 * x1;
                let feasible = match relation {
                    Relation::Le => mean <= bound + 1e-12,
                    Relation::Ge => mean >= bound - 1e-12,
                    Relation::Eq => (mean - bound).abs() <= 1e-12,
                };
                if !feasible {
                    continue;
                }
                let mut tail = 0.0;
                if x0 >= threshold {
                    tail += 1.0 - w1;
                }
                if x1 >= threshold {
                    tail += w1;
                }
                if maximize {
                    best = best.max(tail);
                } else {
                    best = best.min(tail);
                }
            }
        }
    }
    best
}

#[test]
fn upper_bound_agrees_with_grid_oracle_and_markov_formula() {
    let opts = SolverOptions::default();
    for (m, a) in [(0.25, 0.5), (0.1, 0.8), (0.4, 0.45), (0.6, 0.5)] {
        let set = mean_set(Relation::Le, m);
        let phi = QuantityOfInterest::tail_probability(id01(), a);
        let u = upper_bound(&set, &phi, &opts).unwrap().value;
        // Closed form: min(1, m/a) for m < a, and 1 once a Dirac at the
        // threshold is feasible.
        let analytic = if m < a {
            markov_oracle(m, a).unwrap()
        } else {
            1.0
        };
        assert!(
            (u - analytic).abs() < 1e-6,
            "U = {u} vs analytic {analytic} at (m, a) = ({m}, {a})"
        );
        // The grid search only visits feasible measures, so it lower-bounds
        // the sup and converges to it as the grid refines.
        let coarse = two_atom_grid_search(Relation::Le, m, a, true, 200, 200);
        let fine = two_atom_grid_search(Relation::Le, m, a, true, 800, 800);
        assert!(coarse <= u + 1e-9);
        assert!(fine <= u + 1e-9);
        assert!(fine >= coarse - 1e-12);
        assert!(u - fine < 2e-3, "grid oracle too far below the solver");
    }
}

#[test]
fn lower_bound_agrees_with_grid_oracle() {
    let opts = SolverOptions::default();
    // High mean forces tail mass: inf is 0.8, approached but not attained.
    let set = mean_set(Relation::Ge, 0.9);
    let phi = QuantityOfInterest::tail_probability(id01(), 0.5);
    let l = lower_bound(&set, &phi, &opts).unwrap().value;
    assert!((l - 0.8).abs() < 1e-6, "L = {l}");
    let coarse = two_atom_grid_search(Relation::Ge, 0.9, 0.5, false, 200, 200);
    let fine = two_atom_grid_search(Relation::Ge, 0.9, 0.5, false, 800, 800);
    // The grid search upper-bounds the inf and descends toward it.
    assert!(coarse >= l - 1e-9);
    assert!(fine >= l - 1e-9);
    assert!(fine <= coarse + 1e-12);
    assert!(fine - l < 2e-3);
}

#[test]
fn minimax_value_matches_estimator_lattice() {
    // Bernoulli grid, two samples: three data symbols, so an exhaustive
    // lattice over estimator tables is tractable.
    let ps: Vec<f64> = (0..=10).map(|i| i as f64 / 10.0).collect();
    let cands = CandidateFamily::bernoulli_grid(&ps)
        .unwrap()
        .with_data_map(&DataMap::iid(2))
        .unwrap();
    let sol = minimax_estimator(&cands, &LossFunction::Squared, &GameOptions::default()).unwrap();
    assert!(sol.duality_gap <= 1e-6, "gap = {}", sol.duality_gap);

    let like: Vec<&[f64]> = cands.iter().map(|c| c.data.probabilities()).collect();
    let phis: Vec<f64> = cands.iter().map(|c| c.phi_value).collect();
    let step = 0.005;
    let n_grid = (1.0 / step) as usize;
    let mut lattice_best = f64::INFINITY;
    for i0 in 0..=n_grid {
        let t0 = i0 as f64 * step;
        for i1 in 0..=n_grid {
            let t1 = i1 as f64 * step;
            for i2 in 0..=n_grid {
                let t2 = i2 as f64 * step;
                let mut worst: f64 = 0.0;
                for (l, phi) in like.iter().zip(&phis) {
                    let r = l[0] * (t0 - phi) * (t0 - phi)
                        + l[1] * (t1 - phi) * (t1 - phi)
                        + l[2] * (t2 - phi) * (t2 - phi);
                    worst = worst.max(r);
                }
                lattice_best = lattice_best.min(worst);
            }
        }
    }
    // The lattice over-estimates the true minimax by at most the rounding
    // of the optimal table (~2 * step in risk), and can never beat the
    // maximin certificate.
    assert!(lattice_best >= sol.maximin_value - 1e-9);
    assert!(
        (lattice_best - sol.minimax_value).abs() <= 2.5 * step,
        "lattice {lattice_best} vs solver {}",
        sol.minimax_value
    );
}

#[test]
fn threshold_game_matches_full_matrix_enumeration() {
    // Small instance solved exactly: every best-response estimator takes
    // per-symbol decisions among the canonical window centers, so the full
    // finite game over those decisions carries the exact value.
    let ps = [0.2, 0.5, 0.8];
    let cands = CandidateFamily::bernoulli_grid(&ps)
        .unwrap()
        .with_data_map(&DataMap::iid(1))
        .unwrap();
    let gamma = 0.25;
    let loss = LossFunction::threshold(gamma).unwrap();

    // Canonical decisions: single values and centers of pairs closer than
    // the window width.
    let mut decisions = vec![0.2, 0.5, 0.8];
    for i in 0..ps.len() {
        for j in i + 1..ps.len() {
            if ps[j] - ps[i] < 2.0 * gamma {
                decisions.push(0.5 * (ps[i] + ps[j]));
            }
        }
    }
    decisions.sort_by(|a, b| a.partial_cmp(b).unwrap());
    decisions.dedup();

    let alphabet_len = cands[0].data.alphabet().len();
    assert_eq!(alphabet_len, 2);
    // All pure estimator tables over (decision for {0}, decision for {1}).
    let mut matrix: Vec<Vec<f64>> = vec![Vec::new(); cands.len()];
    let mut pure_worst = f64::INFINITY;
    for &d0 in &decisions {
        for &d1 in &decisions {
            let theta = Estimator::Deterministic(vec![d0, d1]);
            let mut col = Vec::with_capacity(cands.len());
            for c in &cands {
                col.push(statistical_error(&theta, c, &loss).unwrap());
            }
            let worst = col.iter().cloned().fold(0.0f64, f64::max);
            pure_worst = pure_worst.min(worst);
            for (k, v) in col.into_iter().enumerate() {
                matrix[k].push(v);
            }
        }
    }
    let exact = exact_matrix_game_value(&matrix);

    let sol = threshold_minimax(&cands, &loss, &GameOptions::default()).unwrap();
    assert!(
        (sol.minimax_value - exact).abs() <= 1e-9,
        "double oracle {} vs exhaustive {exact}",
        sol.minimax_value
    );
    assert!(sol.deterministic_value.unwrap() >= pure_worst - 1e-12);
}

/// Exact value of a zero-sum game by fictitious-play-free enumeration:
/// solves max_p min_j p' M e_j with a fine simplex sweep refined around
/// the optimum. Three rows keep this cheap and solver-independent.
fn exact_matrix_game_value(matrix: &[Vec<f64>]) -> f64 {
    assert_eq!(matrix.len(), 3);
    let cols = matrix[0].len();
    let payoff = |p: &[f64; 3]| -> f64 {
        let mut best = f64::INFINITY;
        for j in 0..cols {
            let v = p[0] * matrix[0][j] + p[1] * matrix[1][j] + p[2] * matrix[2][j];
            best = best.min(v);
        }
        best
    };
    let mut best = f64::NEG_INFINITY;
    let mut arg = [1.0, 0.0, 0.0];
    let n = 400;
    for i in 0..=n {
        for j in 0..=(n - i) {
            let p = [
                i as f64 / n as f64,
                j as f64 / n as f64,
                (n - i - j) as f64 / n as f64,
            ];
            let v = payoff(&p);
            if v > best {
                best = v;
                arg = p;
            }
        }
    }
    // Local refinement around the best lattice point.
    let mut scale = 1.0 / n as f64;
    for _ in 0..30 {
        let mut improved = false;
        for di in [-1.0, 0.0, 1.0] {
            for dj in [-1.0, 0.0, 1.0] {
                let p0 = (arg[0] + di * scale).max(0.0);
                let p1 = (arg[1] + dj * scale).max(0.0);
                if p0 + p1 > 1.0 {
                    continue;
                }
                let p = [p0, p1, 1.0 - p0 - p1];
                let v = payoff(&p);
                if v > best {
                    best = v;
                    arg = p;
                    improved = true;
                }
            }
        }
        if !improved {
            scale *= 0.5;
        }
    }
    best
}

#[test]
fn bayes_estimator_beats_random_perturbations() {
    let ps = [0.15, 0.4, 0.65, 0.9];
    let cands: Vec<Candidate> = CandidateFamily::bernoulli_grid(&ps)
        .unwrap()
        .with_data_map(&DataMap::iid(2))
        .unwrap();
    let prior = Prior::new(&[0.1, 0.4, 0.3, 0.2]).unwrap();
    let loss = LossFunction::Squared;
    let theta = bayes_estimator(&prior, &cands, &loss).unwrap();
    let base = averaged_risk(&theta, &prior, &cands, &loss).unwrap();
    let Estimator::Deterministic(values) = &theta else {
        panic!("posterior mean is deterministic")
    };
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..100 {
        let perturbed: Vec<f64> = values
            .iter()
            .map(|v| v + (rng.gen::<f64>() - 0.5) * 0.2)
            .collect();
        let r = averaged_risk(
            &Estimator::Deterministic(perturbed),
            &prior,
            &cands,
            &loss,
        )
        .unwrap();
        assert!(r >= base - 1e-12);
    }
}

#[test]
fn least_favorable_prior_beats_simplex_sweep() {
    // Three-candidate instance: sweep the whole prior simplex at 1e-2 and
    // refine at 1e-3 near the top; the ascent result must dominate.
    let ps = [0.1, 0.45, 0.95];
    let cands = CandidateFamily::bernoulli_grid(&ps)
        .unwrap()
        .with_data_map(&DataMap::iid(1))
        .unwrap();
    let loss = LossFunction::Squared;
    let lfp = least_favorable_prior(&cands, &loss, &GameOptions::default()).unwrap();

    let bayes_risk = |w: &[f64]| -> f64 {
        let prior = match Prior::new(w) {
            Ok(p) => p,
            Err(_) => return f64::NEG_INFINITY,
        };
        let theta = bayes_estimator(&prior, &cands, &loss).unwrap();
        averaged_risk(&theta, &prior, &cands, &loss).unwrap()
    };
    let n = 100;
    let mut sweep_best = f64::NEG_INFINITY;
    for i in 0..=n {
        for j in 0..=(n - i) {
            let w = [
                i as f64 / n as f64,
                j as f64 / n as f64,
                (n - i - j) as f64 / n as f64,
            ];
            if w.iter().sum::<f64>() <= 0.0 {
                continue;
            }
            sweep_best = sweep_best.max(bayes_risk(&w));
        }
    }
    assert!(
        lfp.bayes_risk >= sweep_best - 1e-6,
        "ascent {} vs sweep {sweep_best}",
        lfp.bayes_risk
    );
}

#[test]
fn worst_case_dominates_every_swept_prior() {
    let ps = [0.2, 0.5, 0.8];
    let cands = CandidateFamily::bernoulli_grid(&ps)
        .unwrap()
        .with_data_map(&DataMap::iid(2))
        .unwrap();
    let alphabet = cands[0].data.alphabet().clone();
    let theta = Estimator::Deterministic(
        alphabet.symbols().iter().map(|s| s.sample_mean()).collect(),
    );
    let loss = LossFunction::Squared;
    let (wce, _) = worst_case_error(&theta, &cands, &loss).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    for _ in 0..2000 {
        let raw: Vec<f64> = (0..cands.len()).map(|_| rng.gen::<f64>()).collect();
        let prior = Prior::new(&raw).unwrap();
        let r = averaged_risk(&theta, &prior, &cands, &loss).unwrap();
        assert!(r <= wce + 1e-12);
    }
}
