//! Monotone covariate-adjusted dose-response curves: isotonic regression of
//! doubly-robust pseudo-outcomes, with Chernoff-based pointwise intervals.

// `!(x < y)` is used on purpose so that NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]
#![allow(clippy::needless_range_loop)]

pub mod data;
pub mod error;
pub mod estimator;
pub mod inference;
pub mod isotonic;
pub mod nuisance;
pub mod quadrature;
pub mod simulation;

pub use data::Dataset;
pub use error::{Error, Result};
