//! Shape-constrained estimation of monotone functions with pointwise confidence
//! intervals.
//!
//! Two models are covered: current-status data, where the target is a
//! distribution function, and samples from a decreasing density. For each there is
//! an unrestricted MLE, an MLE under a pointwise constraint and the
//! likelihood-ratio statistic comparing them. Intervals come either from inverting
//! that statistic against Monte-Carlo quantiles of its universal limit
//! ([`limit_dist`]) or from a studentized bootstrap around a smoothed MLE
//! ([`smle`], [`bootstrap`]).

pub mod error;
pub mod rng;
pub mod isotonic;
pub mod current_status;
pub mod grenander;
pub mod smle;
pub mod band;
pub mod bootstrap;
pub mod limit_dist;
pub mod sim_bench;
pub mod io;

pub use error::{Error, Result};
