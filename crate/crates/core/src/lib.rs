//! Inventory policy toolkit: closed-form (ROP, Q) parameters from sales
//! history, seeded Monte Carlo evaluation of a policy over a one-year
//! horizon, Gaussian-process Bayesian optimization of the order quantity
//! under a fill-rate floor, and post-hoc sensitivity and ANOVA analysis.

// Range checks are written `!(x >= 0.0)` so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod bayesopt;
pub mod config;
pub mod demand;
pub mod domain;
pub mod error;
pub mod gp;
pub mod normal;
pub mod rng;
pub mod sim;
pub mod special;
pub mod stl;

pub use error::{Error, Result};
