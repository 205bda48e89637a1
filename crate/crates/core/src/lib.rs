//! Online distributed kernel learning over networks with random Fourier
//! features.
//!
//! Every node maps its inputs through a shared [`features::FeatureMap`] and
//! runs a linear combine-then-adapt diffusion on the transformed samples
//! ([`learners`]). The [`analysis`] module evaluates the theoretical
//! quantities (autocorrelation, step bounds, mean-square operator,
//! steady-state MSE, regret) that the simulations are checked against.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod baselines;
pub mod data;
pub mod error;
pub mod features;
pub mod learners;
pub mod losses;
pub mod network;
pub mod rng;

pub use error::{Error, Result};
