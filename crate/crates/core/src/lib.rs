//! Monte Carlo engine for bootstrap inference on the maximum of sums of
//! independent high-dimensional random vectors.
//!
//! The crate is organised bottom-up:
//!
//! * [`rng`] seeds and counter-based substreams,
//! * [`special`] normal and gamma distribution functions,
//! * [`datagen`] Gaussian copula simulation with gamma marginals,
//! * [`stat_core`] max statistics, smooth max, empirical laws and distances,
//! * [`bootstrap`] empirical, wild and mixed wild resampling,
//! * [`moments`] plug-in moment functionals and rate certificates,
//! * [`theorycheck`] numerical checks of the smooth-max and interpolation machinery,
//! * [`harness`] experiment runner and result emission.

// `!(x > 0.0)` style guards are used on purpose so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bootstrap;
pub mod datagen;
pub mod error;
pub mod harness;
pub mod moments;
pub mod rng;
pub mod special;
pub mod stat_core;
pub mod theorycheck;

mod par;

pub use bootstrap::{BootstrapPlan, MultiplierKind, Scheme};
pub use datagen::{CopulaSpec, DataMatrix, Structure};
pub use error::{Error, Result};
pub use rng::SeedSpec;
pub use stat_core::{EmpiricalDistribution, MaxMode};
