//! Physics-informed neural networks for PDE-constrained optimal control,
//! with online identification of the diffusion coefficient and a
//! finite-difference reference solver.
//!
//! The pipeline for one test case: [`reference::gradient_method`] computes
//! the optimal control on a grid, [`sampling::sample_dataset`] draws the
//! training points, [`train::train`] fits the network and `ν`, and
//! [`metrics::error_report`] scores the result.

pub mod autodiff;
pub mod error;
pub mod loss;
pub mod metrics;
pub mod network;
pub mod problems;
pub mod reference;
pub mod sampling;
pub mod train;

pub use error::{Error, Result};
