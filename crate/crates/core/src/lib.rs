//! Maximum and minimum extreme value (Gumbel) regression with linear or
//! nonlinear location and dispersion sub-models, and small-sample
//! adjustments of the signed likelihood ratio statistic for one-sided tests.

// NaN must take the rejecting branch of `!(x > 0.0)` checks.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod datasets;
pub mod error;
pub mod evd;
pub mod fit;
pub mod hots;
pub mod inference;
pub mod linalg;
pub mod model;
pub mod optim;
pub mod ortho;
pub mod sim;
pub mod special;

pub use error::{Error, Result};
pub use evd::{GumbelParams, Tail};
pub use fit::{default_init, fit_full, fit_restricted, Direction, FitReport, FitResult, HypothesisSpec};
pub use hots::{run_tests, Statistic, TestReport};
pub use model::{Dataset, DispersionLink, ModelFrame, ModelSpec, PredictorSpec};
