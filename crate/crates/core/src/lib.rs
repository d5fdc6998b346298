//! Treatment-effect variable importance (TE-VIM) estimation.
//!
//! Given observational or trial data `(Y, A, X)`, this crate estimates how much
//! of the variance of the conditional average treatment effect (CATE) is
//! attributable to subsets of the covariates. The headline quantity for a
//! subset `s` is the share
//!
//! ```text
//! Psi_s = E[ var{ tau(X) | X_{-s} } ] / var{ tau(X) }   in [0, 1]
//! ```
//!
//! estimated by one-step (efficient influence curve) estimators built on AIPW
//! pseudo-outcomes, with optional K-fold cross-fitting. Also provided: the ATE,
//! the variance of the treatment effect (VTE), a Chebyshev-style bound on the
//! prevalence of negative conditional effects, a split-sample test of the
//! zero-importance null, a continuous-treatment analogue, and a Monte Carlo
//! harness for studying the estimators on a synthetic data generating process.
//!
//! All numeric code is generic over the floating-point scalar via [`Scalar`];
//! `f64` aliases for the main types are exported at the crate root.

pub mod cate;
pub mod continuous;
pub mod crossfit;
pub mod data;
pub mod error;
pub mod estimands;
pub mod learners;
mod linalg;
pub mod nuisance;
pub mod pseudo;
pub mod scalar;
pub mod seed;
pub mod simulation;
pub mod stats;

pub use error::{Error, Result};
pub use scalar::Scalar;

/// `f64` instantiations of the main generic types.
pub type Dataset64 = data::Dataset<f64>;
pub type FittedModel64 = learners::FittedModel<f64>;
pub type NuisanceFits64 = nuisance::NuisanceFits<f64>;
pub type CateModel64 = cate::CateModel<f64>;
pub type PerObservationEstimates64 = crossfit::PerObservationEstimates<f64>;
pub type TevimEstimate64 = estimands::TevimEstimate<f64>;
pub type ScalarEstimate64 = estimands::ScalarEstimate<f64>;
pub type AnalysisSummary64 = estimands::AnalysisSummary<f64>;
