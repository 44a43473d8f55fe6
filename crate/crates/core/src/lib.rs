//! Diffusions in a `(-kappa/2)`-drifted Brownian potential.
//!
//! The crate builds the random environment and its scale function, samples
//! hitting times and local-time maxima of the diffusion through two
//! independent routes (a time-changed Brownian path and exact Ray-Knight
//! functionals of squared Bessel processes), and provides the stable-law,
//! variational and empirical-distribution machinery needed to check the
//! resulting laws.
//!
//! Every sampler takes an explicit random generator; replicas derive their
//! generators from a [`rng::Stream`], so results do not depend on how work is
//! scheduled across threads. Parallel replication is behind the default
//! `parallel` feature; without it [`rng::replicate`] runs sequentially.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bessel;
pub mod diffusion;
pub mod env;
mod error;
pub mod experiment;
pub mod quad;
pub mod rng;
pub mod stable;
pub mod stats;
pub mod variational;

pub use error::{Error, Result};
