//! Mixture-density-network classifiers whose class scores come from
//! Gaussian-mixture CDF evaluations, and a willingness-to-pay pipeline that
//! learns product valuation laws from binary sales data and composes them into
//! a bundle law by closed-form convolution.
//!
//! Module map:
//!
//! - [`mixture`]: univariate Gaussian mixture algebra and exponential ground truth.
//! - [`nn`]: dense layers, hand-written reverse-mode gradients, Adam, dropout.
//! - [`classifier`]: the two CDF-headed classifiers, their loss, training and grid search.
//! - [`data`]: CSV ingestion, z-normalization, k-fold plans and metrics.
//! - [`bundling`]: sales simulation, the price-to-bundle model and bundle pricing curves.
//! - [`cli`]: the `mdnc` command-line front end.

pub mod bundling;
pub mod classifier;
pub mod cli;
pub mod data;
pub mod error;
pub mod mixture;
pub mod nn;
pub mod seed;

pub use error::{Error, Result};
pub use mixture::{GaussianComponent, GaussianMixture, GroundTruthWtp};
