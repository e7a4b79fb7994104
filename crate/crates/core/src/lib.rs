//! Bayesian latent-variable model linking a panel of dietary biomarkers to
//! food intake, fitted by Metropolis-within-Gibbs sampling on intervention
//! data and used to infer intake from biomarkers alone.

pub mod baselines;
pub mod diagnostics;
pub mod error;
pub mod io;
pub mod model;
pub mod ordinal;
pub mod predict;
pub mod sampler;
pub mod simulate;
pub mod stats;

pub use error::{Error, Result};
