//! Simulation and estimation toolkit for the (1,λ)-Evolution Strategy with
//! resampling on a linear objective under a single linear constraint.
//!
//! The crate is `no_std` (it needs `alloc`). All randomness is supplied by the
//! caller through [`rand::Rng`] streams, so every routine is a deterministic
//! function of its inputs and seed.
//!
//! Layout:
//!
//! - [`special`] and [`quadrature`]: normal CDF/quantile, truncated-normal
//!   quantile, χ² sampling and order-statistic moments.
//! - [`problem`]: constraint geometry and the analytic densities of feasible and
//!   selected steps.
//! - [`es`]: step sampling, selection, the constant step-size and CSA
//!   transitions of the normalized-distance chain, and a general CSA-ES.
//! - [`estimate`]: time averages with batch-means error bars over those chains.
//! - [`boundary`]: bisection searches for the critical population size and
//!   cumulation parameter.
//! - [`stats`]: small statistical helpers (batch means, KS distances).
//! - [`rng`]: reproducible per-replica random streams.
#![no_std]
// `!(x > 0.0)` is used on purpose so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;
#[cfg(any(feature = "std", test))]
extern crate std;

mod error;
pub(crate) mod math;

pub mod boundary;
pub mod es;
pub mod estimate;
pub mod problem;
pub mod quadrature;
pub mod rng;
pub mod special;
pub mod stats;

pub use error::{Error, Result};
