//! Boosted black-box variational inference.
//!
//! A posterior known only through its unnormalized log-joint is approximated
//! by a mixture of mean-field atoms grown greedily with a functional
//! Frank-Wolfe loop. Each new atom maximizes the residual ELBO against the
//! current mixture; a Monte-Carlo duality gap bounds the remaining KL error.

pub mod cli;
pub mod density;
pub mod error;
pub mod fw;
pub mod harness;
pub mod lmo;
pub mod math;
pub mod models;
pub mod probes;
pub mod relbo;
pub mod rng;

pub use error::{Error, Result};
