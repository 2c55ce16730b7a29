//! Bayesian inference for the promotion time cure model on current status
//! data.
//!
//! Each subject is examined once, so only the monitoring time and the event
//! status at that moment are observed; some subjects are immune and never
//! experience the event. The population survival is
//! `exp(-exp(theta'x) F(t))` with a step-function baseline `F` jumping at
//! the distinct monitoring times, giving a cure fraction
//! `exp(-exp(theta'x))`. Posterior computation runs an adaptive Gaussian
//! random-walk Metropolis-Hastings chain seeded at the posterior mode with
//! an observed-information proposal.
//!
//! The crate is organized along the pipeline:
//!
//! - [`data`]: ingestion, the monitoring grid, the isotonic NPMLE pre-check
//! - [`model`]: likelihood, priors, posterior
//! - [`sampler`]: mode search, adaptive Metropolis-Hastings, multi-chain runs
//! - [`summary`]: plug-in estimators and credible intervals
//! - [`checking`]: CPO / LPML / DIC model checking
//! - [`diagnostics`]: autocorrelation, ESS, potential scale reduction
//! - [`simulation`]: Gompertz-baseline generator and replication studies
//!
//! The numerical core is generic over the scalar type through [`real::Real`];
//! the aliases below fix the `f64` instantiations used by the CLI.

pub mod checking;
pub mod data;
pub mod diagnostics;
pub mod error;
pub mod linalg;
pub mod model;
pub mod optim;
pub mod real;
pub mod sampler;
pub mod seeding;
pub mod simulation;
pub mod summary;

pub use error::{Error, Result};
pub use real::Real;

/// `f64` instantiations of the main pipeline types.
pub type Dataset = data::CurrentStatusDataset<f64>;
pub type Grid = data::MonitoringGrid<f64>;
pub type Params = model::ModelParams<f64>;
pub type Prior = model::PriorSpec<f64>;
pub type Chain = sampler::PosteriorChain<f64>;
pub type Summary = summary::FitSummary<f64>;
pub type Scenario = simulation::ScenarioConfig<f64>;
