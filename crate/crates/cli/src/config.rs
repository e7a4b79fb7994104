//! Run configuration: TOML file values overridden by command-line flags.
//!
//! ```toml
//! seed = 7
//! scale = false
//! levels = [50.0, 100.0, 300.0]
//! method = "multimarker"
//! replicates = 5
//! blr_prior_scale = 1e4
//! pls_components = 2
//!
//! [sampler]
//! n_iter = 30000
//! n_burn = 6000
//!
//! [hyper]
//! kappa = 2.0
//!
//! [scenario]
//! study = "I"
//! variance_scenario = "S1"
//! ```

use std::path::Path;

use multimarker::diagnostics::{EvalOptions, Method};
use multimarker::model::HyperOptions;
use multimarker::sampler::SamplerConfig;
use multimarker::simulate::ScenarioConfig;
use multimarker::{Error, Result};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::cli::{SamplerArgs, ScaleArgs, ScenarioArgs};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    pub scale: bool,
    pub levels: Option<Vec<f64>>,
    pub method: String,
    pub replicates: usize,
    pub stochastic_allocation: bool,
    pub blr_prior_scale: f64,
    pub pls_components: usize,
    pub sampler: SamplerConfig,
    pub hyper: HyperOptions,
    pub scenario: ScenarioConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        let eval = EvalOptions::default();
        RunConfig {
            seed: 0,
            scale: false,
            levels: None,
            method: "multimarker".into(),
            replicates: 5,
            stochastic_allocation: false,
            blr_prior_scale: eval.blr_prior_scale,
            pls_components: eval.pls_components,
            sampler: SamplerConfig::default(),
            hyper: HyperOptions::default(),
            scenario: ScenarioConfig::default(),
        }
    }
}

impl RunConfig {
    pub fn load(path: Option<&Path>) -> Result<Self> {
        let Some(path) = path else {
            return Ok(Self::default());
        };
        let text = std::fs::read_to_string(path)?;
        toml::from_str(&text).map_err(|e| Error::Format(format!("config {}: {e}", path.display())))
    }

    /// The seed flag wins over the file; the chosen seed drives the sampler,
    /// the generator and prediction alike.
    pub fn set_seed(&mut self, seed: Option<u64>) {
        if let Some(s) = seed {
            self.seed = s;
        }
        self.sampler.seed = self.seed;
        self.scenario.seed = self.seed;
    }

    pub fn apply_sampler(&mut self, a: &SamplerArgs) {
        if let Some(v) = a.iters {
            self.sampler.n_iter = v;
        }
        if let Some(v) = a.burn {
            self.sampler.n_burn = v;
        }
        if let Some(v) = a.thin {
            self.sampler.thin = v;
        }
        if let Some(v) = a.kappa {
            self.hyper.kappa = v;
        }
        if a.stochastic_allocation {
            self.stochastic_allocation = true;
        }
        self.sampler.stochastic_allocation = self.stochastic_allocation;
    }

    pub fn apply_scale(&mut self, a: &ScaleArgs) {
        if let Some(s) = a.explicit() {
            self.scale = s;
        }
    }

    pub fn apply_scenario(&mut self, a: &ScenarioArgs) -> Result<()> {
        let s = &mut self.scenario;
        if let Some(v) = &a.study {
            let v = if v.chars().all(|c| c == 'i' || c == 'I') {
                v.to_ascii_uppercase()
            } else {
                v.clone()
            };
            s.study = parse_enum("study", &v)?;
        }
        if let Some(v) = &a.scenario {
            s.variance_scenario = parse_enum("scenario", &v.to_ascii_uppercase().replace('.', ""))?;
        }
        if let Some(v) = &a.range {
            s.biomarker_range = parse_enum("range", &v.to_ascii_lowercase())?;
        }
        if let Some(v) = &a.increments {
            s.increments = parse_enum("increments", &v.to_ascii_lowercase())?;
        }
        if let Some(v) = &a.theta {
            s.theta_setting = parse_enum("theta", &v.to_ascii_lowercase())?;
        }
        if let Some(v) = a.n {
            s.n = v;
        }
        if let Some(v) = a.d {
            s.d = v;
        }
        if let Some(v) = a.p {
            s.p = v;
        }
        if a.d_star.is_some() {
            s.d_star = a.d_star;
        }
        s.validate()
    }

    pub fn method(&self, flag: Option<&str>) -> Result<Method> {
        flag.unwrap_or(&self.method).parse()
    }

    pub fn eval(&self) -> EvalOptions {
        EvalOptions {
            hyper: self.hyper,
            sampler: self.sampler.clone(),
            scale: self.scale,
            blr_prior_scale: self.blr_prior_scale,
            pls_components: self.pls_components,
            stochastic_allocation: self.stochastic_allocation,
        }
    }
}

/// Parse a flag value through the type's serde names, so flags and config
/// files accept the same spellings.
fn parse_enum<T: DeserializeOwned>(what: &str, value: &str) -> Result<T> {
    serde_json::from_value(serde_json::Value::String(value.into()))
        .map_err(|_| Error::Usage(format!("invalid {what} '{value}'")))
}
