//! Monte Carlo simulation of two-level ensembles dephasing under thermal
//! detuning and velocity-changing collisions, with pulsed and continuous
//! dynamical decoupling, plus the analysis chain used to extract coherence
//! times from the simulated signals.

// `!(x > 0.0)` is used on purpose so that NaN inputs are rejected.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod bloch;
pub mod cli;
pub mod error;
pub mod noise;
pub mod sequence;
pub mod simulator;

pub use error::{Error, Result};
