//! Simulation and online parameter estimation for conductance-based neuron
//! models.
//!
//! The crate covers:
//! - model description and evaluation in regressor form ([`model`], [`kinetics`], [`presets`]),
//! - fixed-step integration with noise and parameter schedules ([`integrator`]),
//! - adaptive observers based on recursive least squares ([`observers`]),
//! - offline filtered least squares and output-error cost landscapes ([`batch`]),
//! - persistent-excitation, covariance and contraction diagnostics ([`analysis`]),
//! - config-driven scenarios reproducing the reference experiments ([`experiments`]).
//!
//! Units are mV, ms, uA/cm^2, mS/cm^2 and uF/cm^2 throughout.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod error;
pub mod kinetics;
pub mod model;
pub mod integrator;
pub mod observers;
pub mod batch;
pub mod presets;
pub mod analysis;
pub mod experiments;

pub use error::{Error, Result};
