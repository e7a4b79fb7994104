//! Domain types, dataset validation, scaling, hyperparameters and initial state.

mod chain;
mod dataset;
mod hyper;
mod scaling;
mod state;

pub use chain::{LatentDraw, PosteriorChain, CHAIN_FORMAT, CHAIN_FORMAT_VERSION};
pub use dataset::{validate_dataset, Dataset};
pub use hyper::{derive_hyperparameters, HyperOptions, Hyperparameters};
pub use scaling::{scale_biomarkers, BiomarkerScaling};
pub use state::{initialize_state, ModelState, Params, ThetaInit};
