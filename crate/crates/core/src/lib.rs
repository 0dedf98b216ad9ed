//! Exact posterior computation for the Cox proportional hazards model under
//! neutral-to-the-right (NII process) priors on the baseline cumulative
//! hazard, with large-sample diagnostics comparing the posterior against the
//! sampling law of the partial-likelihood estimator.
//!
//! Module map:
//! - [`survival`]: data, CSV ingestion, validation, risk sets, simulation.
//! - [`priors`]: beta and gamma process Lévy measures, moments, path sampling.
//! - [`frequentist`]: partial likelihood, Newton MLE, Breslow, limit functionals.
//! - [`posterior`]: fixed-jump laws, marginal posterior of the coefficients,
//!   samplers for jumps, paths and coefficients.
//! - [`bvm`]: distributional distances, per-dataset checks, coverage runs, reports.

pub mod bvm;
pub mod error;
pub mod frequentist;
pub mod path;
pub mod posterior;
pub mod priors;
pub mod quadrature;
pub mod step;
pub mod survival;

pub use error::{Error, Result};
pub use path::HazardPath;
pub use step::StepFunction;
