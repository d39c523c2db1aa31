//! Problem-specification format: a TOML document with nested key/value
//! blocks. Numbers may be written as decimal strings (the recommended,
//! round-trip-safe form) or as plain TOML numbers; functions are `(x, value)`
//! pair lists over the grid.

use serde::Deserialize;

use ouq_core::admissible::{
    enumerate_candidates, AdmissibleSet, FunctionBand, LatticeSpec, MomentConstraint, Relation,
};
use ouq_core::game::{GameOptions, Prior};
use ouq_core::grid::{GridFn, Interval};
use ouq_core::measure::{make_measure, DiscreteMeasure, QuantityOfInterest};
use ouq_core::risk::{Candidate, CandidateFamily, DataMap, Estimator, LossFunction};
use ouq_core::solver::SolverOptions;

/// A path-addressed validation problem.
#[derive(Debug, Clone)]
pub struct Diagnostic {
    pub path: String,
    pub message: String,
}

impl std::fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "error at {}: {}", self.path, self.message)
    }
}

#[derive(Debug, thiserror::Error)]
pub enum SpecError {
    #[error("parse error: {0}")]
    Parse(String),
    #[error("{}", format_diagnostics(.0))]
    Schema(Vec<Diagnostic>),
}

fn format_diagnostics(diags: &[Diagnostic]) -> String {
    diags
        .iter()
        .map(|d| d.to_string())
        .collect::<Vec<_>>()
        .join("\n")
}

/// A scalar that is either a TOML number or a decimal string.
#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
pub enum Scalar {
    Num(f64),
    Int(i64),
    Text(String),
}

impl Scalar {
    fn as_f64(&self, path: &str, diags: &mut Vec<Diagnostic>) -> Option<f64> {
        match self {
            Scalar::Num(x) => Some(*x),
            Scalar::Int(i) => Some(*i as f64),
            Scalar::Text(s) => match s.trim().parse::<f64>() {
                Ok(x) => Some(x),
                Err(_) => {
                    diags.push(Diagnostic {
                        path: path.to_string(),
                        message: format!("not a number: {s:?}"),
                    });
                    None
                }
            },
        }
    }

    fn as_usize(&self, path: &str, diags: &mut Vec<Diagnostic>) -> Option<usize> {
        let x = self.as_f64(path, diags)?;
        if x < 0.0 || x.fract() != 0.0 {
            diags.push(Diagnostic {
                path: path.to_string(),
                message: format!("expected a nonnegative integer, got {x}"),
            });
            return None;
        }
        Some(x as usize)
    }

    fn as_u64(&self, path: &str, diags: &mut Vec<Diagnostic>) -> Option<u64> {
        self.as_usize(path, diags).map(|x| x as u64)
    }
}

// -- raw (serde) layer -------------------------------------------------------

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawSpec {
    pub kind: String,
    pub domain: Option<RawDomain>,
    #[serde(default)]
    pub constraints: Vec<RawConstraint>,
    pub band: Option<RawBand>,
    pub qoi: Option<RawQoi>,
    pub loss: Option<RawLoss>,
    pub data_map: Option<RawDataMap>,
    pub data_map2: Option<RawDataMap>,
    #[serde(default)]
    pub candidates: Vec<RawCandidate>,
    pub lattice: Option<RawLattice>,
    pub priors: Option<RawPriors>,
    #[serde(default)]
    pub estimators: Vec<RawEstimator>,
    pub epsilon: Option<Scalar>,
    pub solver: Option<RawSolver>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawDomain {
    pub lo: Scalar,
    pub hi: Scalar,
    pub grid: Vec<Scalar>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawConstraint {
    pub g: Vec<Vec<Scalar>>,
    pub relation: String,
    pub bound: Scalar,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawBand {
    pub center: Vec<Vec<Scalar>>,
    pub half_width: Scalar,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawQoi {
    pub kind: String,
    pub f: Option<Vec<Vec<Scalar>>>,
    pub threshold: Option<Scalar>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawLoss {
    pub kind: String,
    pub gamma: Option<Scalar>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawDataMap {
    pub kind: String,
    pub n: Scalar,
    pub g: Option<Vec<Vec<Scalar>>>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawCandidate {
    pub points: Vec<Scalar>,
    pub weights: Vec<Scalar>,
    pub f: Option<Vec<Vec<Scalar>>>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawLattice {
    pub weight_step: Scalar,
    #[serde(default)]
    pub positions: Vec<Scalar>,
    pub band_levels: Option<Scalar>,
    pub cap: Option<Scalar>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawPriors {
    pub pi: Vec<Scalar>,
    pub pi_dagger: Vec<Scalar>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawEstimator {
    pub kind: String,
    pub value: Option<Scalar>,
    pub bias: Option<Scalar>,
    pub values: Option<Vec<Scalar>>,
    pub prior: Option<Vec<Scalar>>,
}

#[derive(Debug, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct RawSolver {
    pub seed: Option<Scalar>,
    pub restarts: Option<Scalar>,
    pub max_iters: Option<Scalar>,
    pub tol: Option<Scalar>,
}

// -- validated layer ---------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ProblemKind {
    OuqBound,
    Certify,
    MinimaxEstimate,
    ConfidenceInterval,
    CompareExperiments,
    MixEstimators,
    BrittlenessDemo,
}

impl ProblemKind {
    pub fn name(&self) -> &'static str {
        match self {
            Self::OuqBound => "ouq_bound",
            Self::Certify => "certify",
            Self::MinimaxEstimate => "minimax_estimate",
            Self::ConfidenceInterval => "confidence_interval",
            Self::CompareExperiments => "compare_experiments",
            Self::MixEstimators => "mix_estimators",
            Self::BrittlenessDemo => "brittleness_demo",
        }
    }
}

/// How an estimator is constructed once the data alphabet is known.
#[derive(Debug, Clone)]
pub enum EstimatorSpec {
    Constant(f64),
    SampleMean { bias: f64 },
    Table(Vec<f64>),
    Bayes(Vec<f64>),
}

impl EstimatorSpec {
    pub fn build(
        &self,
        candidates: &[Candidate],
        loss: &LossFunction,
    ) -> Result<Estimator, String> {
        let alphabet = candidates
            .first()
            .map(|c| c.data.alphabet().clone())
            .ok_or("no candidates")?;
        match self {
            Self::Constant(v) => Ok(Estimator::constant(*v, alphabet.len())),
            Self::SampleMean { bias } => Ok(Estimator::Deterministic(
                alphabet
                    .symbols()
                    .iter()
                    .map(|s| s.sample_mean() + bias)
                    .collect(),
            )),
            Self::Table(values) => {
                if values.len() != alphabet.len() {
                    return Err(format!(
                        "table has {} values for an alphabet of {}",
                        values.len(),
                        alphabet.len()
                    ));
                }
                Ok(Estimator::Deterministic(values.clone()))
            }
            Self::Bayes(weights) => {
                let prior = Prior::new(weights).map_err(|e| e.to_string())?;
                ouq_core::game::bayes_estimator(&prior, candidates, loss)
                    .map_err(|e| e.to_string())
            }
        }
    }
}

/// A validated problem specification, ready to dispatch.
#[derive(Debug)]
pub struct ProblemSpec {
    pub kind: ProblemKind,
    pub admissible: AdmissibleSet,
    pub qoi: QuantityOfInterest,
    pub loss: LossFunction,
    pub data_map: Option<DataMap>,
    pub data_map2: Option<DataMap>,
    /// Explicit candidates, or lattice enumeration output.
    pub members: Vec<(DiscreteMeasure, Option<GridFn>)>,
    pub priors: Option<(Vec<f64>, Vec<f64>)>,
    pub estimators: Vec<EstimatorSpec>,
    pub epsilon: Option<f64>,
    pub solver: SolverOptions,
}

impl ProblemSpec {
    pub fn game_options(&self) -> GameOptions {
        GameOptions {
            max_iters: self.solver.max_iters.max(1),
            tol: self.solver.tol,
            seed: self.solver.seed,
        }
    }

    pub fn candidate_family(&self) -> CandidateFamily {
        CandidateFamily::new(self.members.clone(), self.qoi.clone())
    }
}

fn parse_pairs(
    raw: &[Vec<Scalar>],
    path: &str,
    diags: &mut Vec<Diagnostic>,
) -> Option<GridFn> {
    let mut pairs = Vec::with_capacity(raw.len());
    for (i, pair) in raw.iter().enumerate() {
        if pair.len() != 2 {
            diags.push(Diagnostic {
                path: format!("{path}[{i}]"),
                message: format!("expected an (x, value) pair, got {} entries", pair.len()),
            });
            return None;
        }
        let x = pair[0].as_f64(&format!("{path}[{i}][0]"), diags)?;
        let y = pair[1].as_f64(&format!("{path}[{i}][1]"), diags)?;
        pairs.push((x, y));
    }
    match GridFn::from_pairs(&pairs) {
        Ok(f) => Some(f),
        Err(e) => {
            diags.push(Diagnostic {
                path: path.to_string(),
                message: e.to_string(),
            });
            None
        }
    }
}

fn parse_scalars(raw: &[Scalar], path: &str, diags: &mut Vec<Diagnostic>) -> Option<Vec<f64>> {
    let mut out = Vec::with_capacity(raw.len());
    for (i, s) in raw.iter().enumerate() {
        out.push(s.as_f64(&format!("{path}[{i}]"), diags)?);
    }
    Some(out)
}

/// Parses and validates a spec document. All schema problems are
/// collected; any problem fails the whole validation.
pub fn validate(text: &str) -> Result<ProblemSpec, SpecError> {
    let raw: RawSpec = toml::from_str(text).map_err(|e| SpecError::Parse(e.to_string()))?;
    let mut diags: Vec<Diagnostic> = Vec::new();

    let kind = match raw.kind.as_str() {
        "ouq_bound" => ProblemKind::OuqBound,
        "certify" => ProblemKind::Certify,
        "minimax_estimate" => ProblemKind::MinimaxEstimate,
        "confidence_interval" => ProblemKind::ConfidenceInterval,
        "compare_experiments" => ProblemKind::CompareExperiments,
        "mix_estimators" => ProblemKind::MixEstimators,
        "brittleness_demo" => ProblemKind::BrittlenessDemo,
        other => {
            return Err(SpecError::Schema(vec![Diagnostic {
                path: "kind".into(),
                message: format!("unknown kind {other:?}"),
            }]))
        }
    };

    // Domain and grid.
    let Some(raw_domain) = &raw.domain else {
        return Err(SpecError::Schema(vec![Diagnostic {
            path: "domain".into(),
            message: "required".into(),
        }]));
    };
    let lo = raw_domain.lo.as_f64("domain.lo", &mut diags);
    let hi = raw_domain.hi.as_f64("domain.hi", &mut diags);
    let grid = parse_scalars(&raw_domain.grid, "domain.grid", &mut diags);
    let domain = match (lo, hi) {
        (Some(lo), Some(hi)) => match Interval::new(lo, hi) {
            Ok(d) => Some(d),
            Err(e) => {
                diags.push(Diagnostic {
                    path: "domain".into(),
                    message: e.to_string(),
                });
                None
            }
        },
        _ => None,
    };

    // Constraints and band.
    let mut constraints = Vec::new();
    for (i, rc) in raw.constraints.iter().enumerate() {
        let path = format!("constraints[{i}]");
        let g = parse_pairs(&rc.g, &format!("{path}.g"), &mut diags);
        let bound = rc.bound.as_f64(&format!("{path}.bound"), &mut diags);
        let relation = match rc.relation.as_str() {
            "<=" => Some(Relation::Le),
            ">=" => Some(Relation::Ge),
            "=" | "==" => Some(Relation::Eq),
            other => {
                diags.push(Diagnostic {
                    path: format!("{path}.relation"),
                    message: format!("expected one of <=, >=, =; got {other:?}"),
                });
                None
            }
        };
        if let (Some(g), Some(bound), Some(relation)) = (g, bound, relation) {
            match MomentConstraint::new(g, relation, bound) {
                Ok(c) => constraints.push(c),
                Err(e) => diags.push(Diagnostic {
                    path,
                    message: e.to_string(),
                }),
            }
        }
    }
    let band = match &raw.band {
        None => None,
        Some(rb) => {
            let center = parse_pairs(&rb.center, "band.center", &mut diags);
            let half_width = rb.half_width.as_f64("band.half_width", &mut diags);
            match (center, half_width) {
                (Some(center), Some(hw)) => match FunctionBand::new(center, hw) {
                    Ok(b) => Some(b),
                    Err(e) => {
                        diags.push(Diagnostic {
                            path: "band".into(),
                            message: e.to_string(),
                        });
                        None
                    }
                },
                _ => None,
            }
        }
    };

    // Quantity of interest.
    let qoi = match &raw.qoi {
        None => {
            diags.push(Diagnostic {
                path: "qoi".into(),
                message: "required".into(),
            });
            None
        }
        Some(rq) => {
            let f = match &rq.f {
                Some(pairs) => parse_pairs(pairs, "qoi.f", &mut diags).map(Some),
                None => Some(None),
            };
            match (rq.kind.as_str(), f) {
                ("tail_probability", Some(f)) => {
                    let threshold = match &rq.threshold {
                        Some(t) => t.as_f64("qoi.threshold", &mut diags),
                        None => {
                            diags.push(Diagnostic {
                                path: "qoi.threshold".into(),
                                message: "required for tail_probability".into(),
                            });
                            None
                        }
                    };
                    match (f, threshold, band.is_some()) {
                        (Some(f), Some(t), _) => Some(QuantityOfInterest::tail_probability(f, t)),
                        (None, Some(t), true) => {
                            Some(QuantityOfInterest::tail_probability_paired(t))
                        }
                        (None, Some(_), false) => {
                            diags.push(Diagnostic {
                                path: "qoi.f".into(),
                                message: "required unless a band supplies the paired function"
                                    .into(),
                            });
                            None
                        }
                        _ => None,
                    }
                }
                ("expectation", Some(f)) => match (f, band.is_some()) {
                    (Some(f), _) => Some(QuantityOfInterest::expectation(f)),
                    (None, true) => Some(QuantityOfInterest::expectation_paired()),
                    (None, false) => {
                        diags.push(Diagnostic {
                            path: "qoi.f".into(),
                            message: "required unless a band supplies the paired function".into(),
                        });
                        None
                    }
                },
                (other, _) => {
                    diags.push(Diagnostic {
                        path: "qoi.kind".into(),
                        message: format!(
                            "expected tail_probability or expectation, got {other:?}"
                        ),
                    });
                    None
                }
            }
        }
    };

    // Loss.
    let loss = match &raw.loss {
        None => Some(LossFunction::Squared),
        Some(rl) => match rl.kind.as_str() {
            "squared" => Some(LossFunction::Squared),
            "threshold" => {
                let gamma = match &rl.gamma {
                    Some(g) => g.as_f64("loss.gamma", &mut diags),
                    None => {
                        diags.push(Diagnostic {
                            path: "loss.gamma".into(),
                            message: "required for threshold loss".into(),
                        });
                        None
                    }
                };
                gamma.and_then(|g| match LossFunction::threshold(g) {
                    Ok(l) => Some(l),
                    Err(e) => {
                        diags.push(Diagnostic {
                            path: "loss.gamma".into(),
                            message: e.to_string(),
                        });
                        None
                    }
                })
            }
            other => {
                diags.push(Diagnostic {
                    path: "loss.kind".into(),
                    message: format!("expected squared or threshold, got {other:?}"),
                });
                None
            }
        },
    };

    // Data maps.
    let parse_map = |raw_map: &RawDataMap, path: &str, diags: &mut Vec<Diagnostic>| {
        let n = raw_map.n.as_usize(&format!("{path}.n"), diags)?;
        if n == 0 {
            diags.push(Diagnostic {
                path: format!("{path}.n"),
                message: "sample size must be positive".into(),
            });
            return None;
        }
        match raw_map.kind.as_str() {
            "iid" => Some(DataMap::iid(n)),
            "coarse" => {
                let g = raw_map.g.as_ref().or_else(|| {
                    diags.push(Diagnostic {
                        path: format!("{path}.g"),
                        message: "required for coarse maps".into(),
                    });
                    None
                })?;
                parse_pairs(g, &format!("{path}.g"), diags).map(|g| DataMap::coarse(g, n))
            }
            other => {
                diags.push(Diagnostic {
                    path: format!("{path}.kind"),
                    message: format!("expected iid or coarse, got {other:?}"),
                });
                None
            }
        }
    };
    let data_map = raw
        .data_map
        .as_ref()
        .and_then(|m| parse_map(m, "data_map", &mut diags));
    let data_map2 = raw
        .data_map2
        .as_ref()
        .and_then(|m| parse_map(m, "data_map2", &mut diags));

    // Solver options.
    let mut solver = SolverOptions::default();
    if let Some(rs) = &raw.solver {
        if let Some(s) = &rs.seed {
            if let Some(v) = s.as_u64("solver.seed", &mut diags) {
                solver.seed = v;
            }
        }
        if let Some(s) = &rs.restarts {
            if let Some(v) = s.as_usize("solver.restarts", &mut diags) {
                if v == 0 {
                    diags.push(Diagnostic {
                        path: "solver.restarts".into(),
                        message: "must be positive".into(),
                    });
                } else {
                    solver.restarts = v;
                }
            }
        }
        if let Some(s) = &rs.max_iters {
            if let Some(v) = s.as_usize("solver.max_iters", &mut diags) {
                solver.max_iters = v;
            }
        }
        if let Some(s) = &rs.tol {
            if let Some(v) = s.as_f64("solver.tol", &mut diags) {
                if v <= 0.0 {
                    diags.push(Diagnostic {
                        path: "solver.tol".into(),
                        message: "must be positive".into(),
                    });
                } else {
                    solver.tol = v;
                }
            }
        }
    }

    let epsilon = raw
        .epsilon
        .as_ref()
        .and_then(|e| e.as_f64("epsilon", &mut diags));
    if let Some(e) = epsilon {
        if !(0.0..=1.0).contains(&e) {
            diags.push(Diagnostic {
                path: "epsilon".into(),
                message: format!("must lie in [0, 1], got {e}"),
            });
        }
    }

    // Admissible set (feasibility probe included).
    let admissible = match (domain, &grid) {
        (Some(d), Some(g)) => {
            match AdmissibleSet::new(d, constraints.clone(), band.clone(), g.clone()) {
                Ok(a) => Some(a),
                Err(e) => {
                    diags.push(Diagnostic {
                        path: "constraints".into(),
                        message: e.to_string(),
                    });
                    None
                }
            }
        }
        _ => None,
    };

    // Candidates: explicit blocks or lattice enumeration.
    let needs_candidates = !matches!(kind, ProblemKind::OuqBound | ProblemKind::Certify);
    let mut members: Vec<(DiscreteMeasure, Option<GridFn>)> = Vec::new();
    if !raw.candidates.is_empty() && raw.lattice.is_some() {
        diags.push(Diagnostic {
            path: "candidates".into(),
            message: "give explicit candidates or a lattice, not both".into(),
        });
    }
    if let Some(d) = domain {
        for (i, rc) in raw.candidates.iter().enumerate() {
            let path = format!("candidates[{i}]");
            let points = parse_scalars(&rc.points, &format!("{path}.points"), &mut diags);
            let weights = parse_scalars(&rc.weights, &format!("{path}.weights"), &mut diags);
            let f = match &rc.f {
                Some(pairs) => parse_pairs(pairs, &format!("{path}.f"), &mut diags).map(Some),
                None => Some(None),
            };
            if let (Some(points), Some(weights), Some(f)) = (points, weights, f) {
                match make_measure(&points, &weights, d) {
                    Ok(mu) => members.push((mu, f)),
                    Err(e) => diags.push(Diagnostic {
                        path,
                        message: e.to_string(),
                    }),
                }
            }
        }
    }
    if let (Some(rl), Some(a_set)) = (&raw.lattice, &admissible) {
        let weight_step = rl.weight_step.as_f64("lattice.weight_step", &mut diags);
        if let Some(step) = weight_step {
            if step <= 0.0 {
                diags.push(Diagnostic {
                    path: "lattice.weight_step".into(),
                    message: "positive step required".into(),
                });
            } else {
                let mut lattice = LatticeSpec::with_weight_step(step);
                if !rl.positions.is_empty() {
                    if let Some(p) =
                        parse_scalars(&rl.positions, "lattice.positions", &mut diags)
                    {
                        lattice.positions = p;
                    }
                }
                if let Some(b) = &rl.band_levels {
                    if let Some(v) = b.as_usize("lattice.band_levels", &mut diags) {
                        lattice.band_levels = v;
                    }
                }
                if let Some(c) = &rl.cap {
                    if let Some(v) = c.as_usize("lattice.cap", &mut diags) {
                        lattice.cap = v;
                    }
                }
                match enumerate_candidates(a_set, &lattice) {
                    Ok(list) => members.extend(list),
                    Err(e) => diags.push(Diagnostic {
                        path: "lattice".into(),
                        message: e.to_string(),
                    }),
                }
            }
        }
    }
    if needs_candidates && members.is_empty() && diags.is_empty() {
        diags.push(Diagnostic {
            path: "candidates".into(),
            message: format!("kind {} requires candidates or a lattice", kind.name()),
        });
    }

    // Priors.
    let priors = match (&raw.priors, kind) {
        (Some(rp), _) => {
            let pi = parse_scalars(&rp.pi, "priors.pi", &mut diags);
            let dagger = parse_scalars(&rp.pi_dagger, "priors.pi_dagger", &mut diags);
            match (pi, dagger) {
                (Some(pi), Some(dagger)) => {
                    if pi.len() != members.len() || dagger.len() != members.len() {
                        diags.push(Diagnostic {
                            path: "priors".into(),
                            message: format!(
                                "priors must have one weight per candidate ({})",
                                members.len()
                            ),
                        });
                        None
                    } else {
                        Some((pi, dagger))
                    }
                }
                _ => None,
            }
        }
        (None, ProblemKind::BrittlenessDemo) => {
            diags.push(Diagnostic {
                path: "priors".into(),
                message: "required for brittleness_demo".into(),
            });
            None
        }
        (None, _) => None,
    };

    // Estimators.
    let mut estimators = Vec::new();
    for (i, re) in raw.estimators.iter().enumerate() {
        let path = format!("estimators[{i}]");
        match re.kind.as_str() {
            "constant" => {
                let v = match &re.value {
                    Some(v) => v.as_f64(&format!("{path}.value"), &mut diags),
                    None => {
                        diags.push(Diagnostic {
                            path: format!("{path}.value"),
                            message: "required for constant estimators".into(),
                        });
                        None
                    }
                };
                if let Some(v) = v {
                    estimators.push(EstimatorSpec::Constant(v));
                }
            }
            "sample_mean" => {
                let bias = match &re.bias {
                    Some(b) => b.as_f64(&format!("{path}.bias"), &mut diags).unwrap_or(0.0),
                    None => 0.0,
                };
                estimators.push(EstimatorSpec::SampleMean { bias });
            }
            "table" => match &re.values {
                Some(vals) => {
                    if let Some(v) = parse_scalars(vals, &format!("{path}.values"), &mut diags) {
                        estimators.push(EstimatorSpec::Table(v));
                    }
                }
                None => diags.push(Diagnostic {
                    path: format!("{path}.values"),
                    message: "required for table estimators".into(),
                }),
            },
            "bayes" => match &re.prior {
                Some(p) => {
                    if let Some(v) = parse_scalars(p, &format!("{path}.prior"), &mut diags) {
                        estimators.push(EstimatorSpec::Bayes(v));
                    }
                }
                None => diags.push(Diagnostic {
                    path: format!("{path}.prior"),
                    message: "required for bayes estimators".into(),
                }),
            },
            other => diags.push(Diagnostic {
                path: format!("{path}.kind"),
                message: format!("unknown estimator kind {other:?}"),
            }),
        }
    }

    // Kind-specific requirements.
    let require = |cond: bool, path: &str, msg: &str, diags: &mut Vec<Diagnostic>| {
        if !cond {
            diags.push(Diagnostic {
                path: path.into(),
                message: msg.into(),
            });
        }
    };
    match kind {
        ProblemKind::OuqBound => {}
        ProblemKind::Certify => {
            require(epsilon.is_some(), "epsilon", "required for certify", &mut diags);
        }
        ProblemKind::MinimaxEstimate => {
            require(data_map.is_some(), "data_map", "required", &mut diags);
        }
        ProblemKind::ConfidenceInterval => {
            require(data_map.is_some(), "data_map", "required", &mut diags);
            require(
                epsilon.is_some(),
                "epsilon",
                "required for confidence_interval",
                &mut diags,
            );
        }
        ProblemKind::CompareExperiments => {
            require(data_map.is_some(), "data_map", "required", &mut diags);
            require(data_map2.is_some(), "data_map2", "required", &mut diags);
        }
        ProblemKind::MixEstimators => {
            require(data_map.is_some(), "data_map", "required", &mut diags);
            require(
                !raw.estimators.is_empty(),
                "estimators",
                "at least one estimator required",
                &mut diags,
            );
        }
        ProblemKind::BrittlenessDemo => {
            require(data_map.is_some(), "data_map", "required", &mut diags);
        }
    }
    if kind == ProblemKind::Certify {
        if let Some(QuantityOfInterest::Expectation { .. }) = &qoi {
            diags.push(Diagnostic {
                path: "qoi.kind".into(),
                message: "certify requires a tail_probability quantity of interest".into(),
            });
        }
    }

    if !diags.is_empty() {
        return Err(SpecError::Schema(diags));
    }
    Ok(ProblemSpec {
        kind,
        admissible: admissible.expect("validated"),
        qoi: qoi.expect("validated"),
        loss: loss.expect("validated"),
        data_map,
        data_map2,
        members,
        priors,
        estimators,
        epsilon,
        solver,
    })
}
