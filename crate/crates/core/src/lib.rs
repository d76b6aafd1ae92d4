//! Bootstrap percolation on kernel-based inhomogeneous random graphs.
//!
//! The asymptotic final infected fraction is `∫ f_hat dmu`, where `f_hat`
//! is the minimal fixed point of the Poisson infection operator built from
//! the connection kernel and the (threshold, type) distribution. This crate
//! computes that fixed point (monotone iteration and a neural-network
//! approximation), brackets it with step kernels, evaluates the equivalent
//! finite-type system, classifies resilience of uninfected graphs, and
//! simulates the percolation process on sampled finite graphs.

pub mod error;
pub mod finite_type;
pub mod fixed_point;
pub mod model;
pub mod operators;
pub mod oracle;
pub mod resilience;
pub mod simulator;

pub use error::{Error, Result};
