//! Numerical toolkit for optimal uncertainty quantification and minimax
//! statistical decision games over finite discrete measures.
//!
//! Everything here is finite by construction: probability measures are
//! convex combinations of Dirac masses, functions are tabulated on grids,
//! observed data lives in a finite alphabet of sample multisets. Within
//! that world the toolkit computes
//!
//! - optimal upper/lower bounds `U(A)`, `L(A)` on a quantity of interest
//!   over a moment-constrained admissible set ([`solver`]),
//! - worst-case and Bayes-averaged statistical errors of estimators
//!   ([`risk`]),
//! - Bayes estimators, least favorable priors and minimax estimators with
//!   duality certificates ([`game`]),
//! - optimal intervals of confidence via the threshold-loss game
//!   ([`confidence`]),
//! - the conditional-expectation version family and the brittleness
//!   sandwich ratio for priors that are not absolutely continuous
//!   ([`brittleness`]).

pub mod admissible;
pub mod brittleness;
pub mod confidence;
pub mod game;
pub mod grid;
pub mod measure;
pub(crate) mod numeric;
pub mod risk;
pub mod solver;

pub use admissible::{AdmissibleSet, DiracParametrization, FunctionBand, MomentConstraint, Relation};
pub use confidence::ConfidenceResult;
pub use game::{GameSolution, Prior};
pub use grid::{GridFn, Interval};
pub use measure::{DataDistribution, DataSymbol, DiscreteMeasure, QuantityOfInterest};
pub use risk::{Candidate, CandidateFamily, DataMap, Estimator, LossFunction};
pub use solver::{BoundResult, SolverOptions};
