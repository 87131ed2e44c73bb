//! Wireless power transfer and rate-energy signal design.
//!
//! The crate models a multi-antenna transmitter on a uniform tone grid, a
//! diode rectenna with a Taylor-expansion nonlinearity, and the optimizers
//! built on top of it: multisine waveforms, beamforming and combining,
//! reflecting-surface configuration, rate-energy tradeoffs, learned
//! modulation, and two wireless-powered IoT schedulers.

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod beamforming;
pub mod channel;
pub mod cli;
pub mod combining;
pub mod error;
pub mod hpa;
pub mod irs;
pub mod learning;
pub mod mec;
pub mod numerics;
pub mod rate_energy;
pub mod rectenna;
pub mod sensing;
pub mod signal;
pub mod waveform;

pub use error::{Result, WptError};
