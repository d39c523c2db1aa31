//! Dispatch a validated problem spec to the solvers and assemble the
//! machine-readable report.

use std::fs;
use std::io::Write;
use std::path::Path;

use serde::Serialize;
use serde_json::{json, Value};

use ouq_core::brittleness::{midpoint_comparison, sandwich_check, BrittleError};
use ouq_core::confidence::optimal_confidence_interval;
use ouq_core::game::{compare_experiments, minimax_estimator, mix_estimators, GameSolution, Prior};
use ouq_core::measure::Alphabet;
use ouq_core::risk::{worst_case_error, Candidate, Estimator};
use ouq_core::solver::{certify, lower_bound, upper_bound, BoundResult, SolverStatus};

use crate::spec::{ProblemKind, ProblemSpec};

#[derive(Debug, thiserror::Error)]
pub enum RunError {
    #[error("solver: {0}")]
    Solver(#[from] ouq_core::solver::SolverError),
    #[error("risk: {0}")]
    Risk(#[from] ouq_core::risk::RiskError),
    #[error("game: {0}")]
    Game(#[from] ouq_core::game::GameError),
    #[error("confidence: {0}")]
    Confidence(#[from] ouq_core::confidence::ConfidenceError),
    #[error("brittleness: {0}")]
    Brittleness(#[from] BrittleError),
    #[error("estimator spec: {0}")]
    Estimator(String),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("{0}")]
    Other(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OutputFormat {
    Json,
    Csv,
}

/// The primary report document. Identical spec, seed and tool version
/// reproduce it byte for byte; wall time is therefore reported on the
/// console, never in here.
#[derive(Serialize)]
pub struct RunReport {
    pub tool: &'static str,
    pub version: &'static str,
    pub kind: &'static str,
    pub seed: u64,
    pub spec_echo: toml::Value,
    pub converged: bool,
    pub results: Value,
}

pub struct RunOutcome {
    pub report: RunReport,
    pub sidecars: Vec<(String, String)>,
}

fn bound_json(b: &BoundResult) -> Value {
    json!({
        "value": b.value,
        "status": match b.status { SolverStatus::Converged => "converged", SolverStatus::MaxIter => "max_iter" },
        "extremizer": {
            "support": b.extremizer.support(),
            "weights": b.extremizer.weights(),
        },
        "band_values": b.band_values.as_ref().map(|f| f.nodes().collect::<Vec<_>>()),
        "restarts": b.trace.restarts,
        "iterations": b.trace.iterations,
    })
}

fn estimator_json(theta: &Estimator, alphabet: &Alphabet) -> Value {
    let symbols: Vec<String> = alphabet.symbols().iter().map(|s| s.to_string()).collect();
    match theta {
        Estimator::Deterministic(values) => json!({
            "kind": "deterministic",
            "symbols": symbols,
            "values": values,
        }),
        Estimator::Randomized { kernel, decisions } => json!({
            "kind": "randomized",
            "symbols": symbols,
            "decisions": decisions,
            "kernel": kernel,
        }),
    }
}

fn game_json(sol: &GameSolution, alphabet: &Alphabet) -> Value {
    json!({
        "minimax_value": sol.minimax_value,
        "maximin_value": sol.maximin_value,
        "duality_gap": sol.duality_gap,
        "iterations": sol.iterations,
        "converged": sol.converged,
        "least_favorable_prior": sol.least_favorable_prior.weights(),
        "estimator": estimator_json(&sol.estimator, alphabet),
        "deterministic_estimator": sol
            .deterministic_estimator
            .as_ref()
            .map(|t| estimator_json(t, alphabet)),
        "deterministic_value": sol.deterministic_value,
    })
}

fn csv_of_rows(header: &str, rows: impl Iterator<Item = String>) -> String {
    let mut out = String::from(header);
    out.push('\n');
    for row in rows {
        out.push_str(&row);
        out.push('\n');
    }
    out
}

fn candidates_of(spec: &ProblemSpec) -> Result<Vec<Candidate>, RunError> {
    let family = spec.candidate_family();
    let map = spec
        .data_map
        .as_ref()
        .ok_or_else(|| RunError::Other("data_map required".into()))?;
    Ok(family.with_data_map(map)?)
}

/// Runs the spec and assembles the report plus any CSV sidecars.
pub fn run(spec: &ProblemSpec, spec_echo: toml::Value) -> Result<RunOutcome, RunError> {
    let mut sidecars: Vec<(String, String)> = Vec::new();
    let opts = &spec.solver;
    let game_opts = spec.game_options();

    let (results, converged) = match spec.kind {
        ProblemKind::OuqBound => {
            let upper = upper_bound(&spec.admissible, &spec.qoi, opts)?;
            let lower = lower_bound(&spec.admissible, &spec.qoi, opts)?;
            let converged = upper.status == SolverStatus::Converged
                && lower.status == SolverStatus::Converged;
            sidecars.push((
                "restarts.csv".into(),
                csv_of_rows(
                    "restart,upper_value,lower_value",
                    upper
                        .trace
                        .best_per_restart
                        .iter()
                        .zip(&lower.trace.best_per_restart)
                        .enumerate()
                        .map(|(i, (u, l))| format!("{i},{u},{l}")),
                ),
            ));
            (
                json!({
                    "lower": bound_json(&lower),
                    "upper": bound_json(&upper),
                    "midpoint": 0.5 * (lower.value + upper.value),
                }),
                converged,
            )
        }
        ProblemKind::Certify => {
            let epsilon = spec.epsilon.expect("validated");
            let res = certify(&spec.admissible, &spec.qoi, epsilon, opts)?;
            let converged = res.upper.status == SolverStatus::Converged
                && res.lower.status == SolverStatus::Converged;
            (
                json!({
                    "verdict": format!("{:?}", res.verdict),
                    "epsilon": epsilon,
                    "lower": bound_json(&res.lower),
                    "upper": bound_json(&res.upper),
                }),
                converged,
            )
        }
        ProblemKind::MinimaxEstimate => {
            let candidates = candidates_of(spec)?;
            let sol = minimax_estimator(&candidates, &spec.loss, &game_opts)?;
            let alphabet = candidates[0].data.alphabet();
            sidecars.push((
                "prior_ascent.csv".into(),
                csv_of_rows(
                    "iteration,bayes_risk",
                    sol.ascent_trajectory
                        .iter()
                        .enumerate()
                        .map(|(i, v)| format!("{i},{v}")),
                ),
            ));
            let converged = sol.converged && sol.duality_gap <= game_opts.tol.max(1e-6);
            (game_json(&sol, alphabet), converged)
        }
        ProblemKind::ConfidenceInterval => {
            let candidates = candidates_of(spec)?;
            let epsilon = spec.epsilon.expect("validated");
            let res = optimal_confidence_interval(epsilon, &candidates, &game_opts)?;
            let alphabet = candidates[0].data.alphabet();
            let mut curve = res.bisection_trace.clone();
            curve.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
            sidecars.push((
                "gamma_curve.csv".into(),
                csv_of_rows(
                    "gamma,value",
                    curve.iter().map(|(g, v)| format!("{g},{v}")),
                ),
            ));
            (
                json!({
                    "gamma_eps": res.gamma_eps,
                    "epsilon": res.epsilon,
                    "game_value_at_gamma": res.game_value_at_gamma,
                    "mixed_value_at_gamma": res.mixed_value_at_gamma,
                    "estimator": estimator_json(&res.estimator, alphabet),
                    "interval_rule": "[theta(d) - gamma_eps, theta(d) + gamma_eps]",
                }),
                true,
            )
        }
        ProblemKind::CompareExperiments => {
            let family = spec.candidate_family();
            let map1 = spec.data_map.as_ref().expect("validated");
            let map2 = spec.data_map2.as_ref().expect("validated");
            let cmp = compare_experiments(&family, map1, map2, &spec.loss, &game_opts)?;
            (
                json!({
                    "order": format!("{:?}", cmp.order),
                    "first_value": cmp.first_value,
                    "second_value": cmp.second_value,
                }),
                true,
            )
        }
        ProblemKind::MixEstimators => {
            let candidates = candidates_of(spec)?;
            let thetas: Vec<Estimator> = spec
                .estimators
                .iter()
                .map(|e| e.build(&candidates, &spec.loss))
                .collect::<Result<_, _>>()
                .map_err(RunError::Estimator)?;
            let res = mix_estimators(&thetas, &candidates, &spec.loss, &game_opts)?;
            let mixed: Vec<f64> = {
                let tables: Vec<&Vec<f64>> = thetas
                    .iter()
                    .map(|t| match t {
                        Estimator::Deterministic(v) => v,
                        Estimator::Randomized { .. } => unreachable!("mixing is deterministic"),
                    })
                    .collect();
                let len = tables[0].len();
                (0..len)
                    .map(|d| {
                        res.alpha
                            .iter()
                            .zip(&tables)
                            .map(|(a, t)| a * t[d])
                            .sum()
                    })
                    .collect()
            };
            let theta_mix = Estimator::Deterministic(mixed);
            let (check, _) = worst_case_error(&theta_mix, &candidates, &spec.loss)?;
            (
                json!({
                    "alpha": res.alpha,
                    "value": res.value,
                    "vertex_values": res.vertex_values,
                    "recomputed_worst_case": check,
                }),
                true,
            )
        }
        ProblemKind::BrittlenessDemo => {
            let candidates = candidates_of(spec)?;
            let (pi_w, dagger_w) = spec.priors.as_ref().expect("validated");
            let pi = Prior::new(pi_w)?;
            let dagger = Prior::new(dagger_w)?;
            let report = sandwich_check(&pi, &dagger, &candidates)?;
            let alphabet = candidates[0].data.alphabet();
            let witnesses: Vec<Value> = report
                .gap
                .witnesses
                .iter()
                .map(|w| {
                    json!({
                        "symbol": alphabet.symbols()[w.atom].to_string(),
                        "mass": w.mass,
                        "conditional_mean": w.gamma,
                        "worst_value": w.y,
                        "best_value": w.z,
                    })
                })
                .collect();
            let midpoint = match midpoint_comparison(&pi, &dagger, &candidates) {
                Ok(cmp) => json!({
                    "sup_gap": cmp.sup_gap,
                    "midpoint_risk": cmp.midpoint_risk,
                    "dominates": cmp.sup_gap >= cmp.midpoint_risk - 1e-12,
                }),
                Err(BrittleError::NotOrthogonal { .. }) => Value::Null,
                Err(e) => return Err(e.into()),
            };
            (
                json!({
                    "ratio": report.ratio,
                    "lower_ok": report.lower_ok,
                    "upper_ok": report.upper_ok,
                    "sup_gap": report.sup_gap,
                    "null_mass": report.null_mass,
                    "value_range": report.gap.free_range,
                    "risk_worst": report.risk_worst,
                    "risk_best": report.risk_best,
                    "reproduction_error": report.reproduction_error,
                    "witnesses": witnesses,
                    "theta_worst": estimator_json(&report.theta_worst, alphabet),
                    "theta_best": estimator_json(&report.theta_best, alphabet),
                    "midpoint_comparison": midpoint,
                }),
                true,
            )
        }
    };

    Ok(RunOutcome {
        report: RunReport {
            tool: "ouq",
            version: env!("CARGO_PKG_VERSION"),
            kind: spec.kind.name(),
            seed: spec.solver.seed,
            spec_echo,
            converged,
            results,
        },
        sidecars,
    })
}

/// Writes the report (and sidecars, for CSV format) under `out_dir`.
pub fn write_outputs(
    outcome: &RunOutcome,
    out_dir: &Path,
    format: OutputFormat,
) -> Result<(), RunError> {
    fs::create_dir_all(out_dir)?;
    let report_path = out_dir.join("report.json");
    let mut f = fs::File::create(&report_path)?;
    let body = serde_json::to_string_pretty(&outcome.report)
        .map_err(|e| RunError::Other(e.to_string()))?;
    f.write_all(body.as_bytes())?;
    f.write_all(b"\n")?;
    if format == OutputFormat::Csv {
        for (name, contents) in &outcome.sidecars {
            fs::write(out_dir.join(name), contents)?;
        }
    }
    Ok(())
}
