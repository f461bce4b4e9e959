//! Multiple systems estimation (capture-recapture) for population-size
//! inference from overlapping incomplete lists.
//!
//! The crate is organized around a single input type, the [`CountTable`] of
//! observed list-inclusion patterns, and four estimators that turn it into an
//! [`Estimate`]:
//!
//! * [`loglinear`]: Poisson log-linear fits, the independence estimator and a
//!   stepwise-selected sparse model with BCa bootstrap intervals.
//! * [`dga`]: Bayesian model averaging over decomposable graphical models
//!   with hyper-Dirichlet priors.
//! * [`lcmcr`]: a latent-class mixture of independence models fitted by Gibbs
//!   sampling, with multi-chain convergence diagnostics.
//!
//! Around them sit the asymptotic-bias calculator ([`bias`]), evaluation
//! harnesses ([`diagnostics`]) and a static SVG renderer ([`figure`]).
//!
//! ```
//! use msekit::{catalog, loglinear};
//!
//! let uk = catalog::load("uk").unwrap();
//! let fit = loglinear::fit_loglinear(&uk.table, &loglinear::LogLinearModel::independence(5)).unwrap();
//! assert!(fit.n_hat > 2744.0);
//! ```

pub mod bias;
pub mod catalog;
pub mod data;
pub mod dga;
pub mod diagnostics;
pub mod estimate;
pub mod figure;
pub mod lcmcr;
pub mod loglinear;
pub mod stats;

pub use data::{
    CellProbabilities, ConditionedDataset, Conditioning, CountTable, DataError, Dataset,
    DatasetSummary, Pattern,
};
pub use estimate::{Estimate, EstimateError, PopulationEstimator};

/// Crate version, recorded in run manifests.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
