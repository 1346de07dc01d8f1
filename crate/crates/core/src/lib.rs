//! Bayesian meta-analysis of diagnostic test accuracy with copula-based
//! bivariate beta-binomial models and the bivariate normal random-effects
//! model, sampled with a built-in No-U-Turn sampler.

pub mod copula;
pub mod data;
pub mod diagnostics;
pub mod error;
pub mod model;
pub mod sampler;
pub mod scalar;
pub mod special;
pub mod summary;

pub use error::{Error, Result};
