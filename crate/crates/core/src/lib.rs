//! Right-endpoint estimation for light-tailed distributions.
//!
//! The crate works on the upper order statistics of an i.i.d. sample and
//! provides:
//!
//! - the general endpoint estimator (no extreme value index needed), its
//!   reduced-bias variants and a Weibull-limit confidence upper bound
//!   ([`endpoint`]);
//! - the sample maximum and the moment-type endpoint estimator
//!   ([`endpoint::max_estimate`], [`endpoint::mominv`]);
//! - peaks-over-threshold GPD maximum likelihood, including a log-linear
//!   trend in the scale and the deviance test ([`gpd_ml`]);
//! - max-domain-of-attraction tests and the k-selection rule
//!   ([`domain_tests`]);
//! - tail exceedance probabilities ([`tail_prob`]);
//! - the four parent models and a deterministic Monte Carlo harness
//!   ([`models_mc`]).

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::excessive_precision)]

pub mod cli;
pub mod domain_tests;
pub mod endpoint;
pub mod error;
pub mod gpd_ml;
pub mod models_mc;
pub mod sample;
pub mod stats_math;
pub mod tail_prob;

pub use error::{EvtError, Result};
pub use sample::SortedSample;
