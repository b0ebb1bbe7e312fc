//! Non-parametric drift and diffusion estimation for one-dimensional
//! stochastic processes observed on irregular time grids.
//!
//! The pipeline follows the usual Kramers-Moyal route: increments of a
//! (preprocessed) series are regressed on the current state with a kernel
//! smoother, the first two conditional moments are converted to physical
//! and annualized rates, the drift is integrated into a potential, and the
//! potential's minima are classified into single- or multi-well shapes.
//! A seeded Euler-Maruyama simulator provides ground-truth paths.
//!
//! ```no_run
//! use kmwell::{sim, timeseries, km};
//!
//! let spec = sim::make_ou(3.0, 0.4, 0.0, 7).unwrap();
//! let path = sim::simulate(&spec, 100.0, 200_000).unwrap();
//! let ts = path.to_time_series("ou").unwrap();
//! let sample = timeseries::make_increments(&ts, 6).unwrap();
//! let est = km::estimate_km(&sample, &km::EstimatorConfig::default()).unwrap();
//! println!("{} valid nodes", est.valid_count());
//! ```

// `!(x > 0.0)` is used on purpose so that NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
mod error;
pub mod exec;
pub mod io;
pub mod km;
pub mod pipeline;
pub mod potential;
mod serde_util;
pub mod sim;
pub mod timeseries;

pub use error::{Error, Result};
pub use exec::Execution;

/// Seconds in a 365.25-day year; default annualization constant.
pub const YEAR_SECONDS: f64 = 31_557_600.0;
