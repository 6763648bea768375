//! Fairness-aware ensemble toolkit.
//!
//! Measures the discriminative risk (DR) of classifiers under sensitive-attribute
//! perturbation, audits first-/second-order oracle bounds and Hoeffding/McAllester
//! PAC-Bayesian bounds on weighted-vote ensembles, and prunes ensembles to jointly
//! improve fairness and accuracy (POAF, EPAF-C, EPAF-D).

pub mod bounds;
pub mod dataset;
pub mod ensemble;
pub mod harness;
pub mod metrics;
pub mod pruning;
pub mod seeding;
