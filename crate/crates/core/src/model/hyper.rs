use serde::{Deserialize, Serialize};

use super::Dataset;
use crate::error::{Error, Result};
use crate::ordinal::fit_ordinal_cauchit_mle;

/// Fixed prior and hyperprior constants.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Hyperparameters {
    pub m_alpha: f64,
    pub m_beta: f64,
    pub tau_alpha: f64,
    pub tau_beta: f64,
    /// Always 1 (identifiability).
    pub sigma_alpha2: f64,
    pub nu_beta1: f64,
    pub nu_beta2: f64,
    pub nu_p1: f64,
    pub nu_p2: f64,
    pub nu_z1: Vec<f64>,
    pub nu_z2: Vec<f64>,
    pub m_gamma: Vec<f64>,
    pub m_eta: Vec<f64>,
    pub kappa: f64,
    /// False when the ordinal fit seeding `m_gamma`/`m_eta` hit its iteration cap.
    pub ordinal_converged: bool,
}

/// Free choices in the empirical-Bayes recipe.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct HyperOptions {
    pub tau_alpha: f64,
    pub tau_beta: f64,
    pub kappa: f64,
}

impl Default for HyperOptions {
    fn default() -> Self {
        HyperOptions {
            tau_alpha: 1.0,
            tau_beta: 1.0,
            kappa: 2.0,
        }
    }
}

impl Hyperparameters {
    pub fn d(&self) -> usize {
        self.nu_z1.len()
    }

    pub fn p(&self) -> usize {
        self.m_eta.len()
    }

    pub fn validate(&self) -> Result<()> {
        let pos = |name: &str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(Error::Parameter(format!(
                    "{name} must be positive and finite, got {v}"
                )))
            }
        };
        for (name, v) in [
            ("tau_alpha", self.tau_alpha),
            ("tau_beta", self.tau_beta),
            ("nu_beta1", self.nu_beta1),
            ("nu_beta2", self.nu_beta2),
            ("nu_p1", self.nu_p1),
            ("nu_p2", self.nu_p2),
            ("kappa", self.kappa),
        ] {
            pos(name, v)?;
        }
        if self.kappa > 2.0 {
            return Err(Error::Parameter(format!(
                "kappa must not exceed 2, got {}",
                self.kappa
            )));
        }
        if self.sigma_alpha2 != 1.0 {
            return Err(Error::Parameter("sigma_alpha2 is fixed at 1".into()));
        }
        if !(self.m_alpha >= 0.0) || !(self.m_beta >= 0.0) {
            return Err(Error::Parameter(
                "m_alpha and m_beta must be nonnegative".into(),
            ));
        }
        let d = self.d();
        if self.nu_z2.len() != d || self.m_gamma.len() + 1 != d {
            return Err(Error::Dimension {
                what: "component hyperparameters",
                expected: d,
                found: self.nu_z2.len(),
            });
        }
        for v in self.nu_z1.iter().chain(&self.nu_z2) {
            pos("nu_z", *v)?;
        }
        if self.m_gamma.windows(2).any(|w| !(w[0] < w[1]))
            || self.m_gamma.iter().any(|g| !g.is_finite())
        {
            return Err(Error::Parameter(
                "m_gamma must be finite and strictly increasing".into(),
            ));
        }
        if self.m_eta.iter().any(|e| !e.is_finite()) {
            return Err(Error::Parameter("m_eta must be finite".into()));
        }
        Ok(())
    }

    /// Prior mean of `sigma_beta2`.
    pub fn sigma_beta2_prior_mean(&self) -> f64 {
        if self.nu_beta1 > 1.0 {
            self.nu_beta2 / (self.nu_beta1 - 1.0)
        } else {
            self.nu_beta2
        }
    }
}

/// Pooled least-squares line of all biomarker values on consumed quantity.
fn pooled_ols(data: &Dataset, x: &[f64]) -> (f64, f64) {
    let y = data.y();
    let n = x.len() as f64;
    let xbar = x.iter().sum::<f64>() / n;
    let ybar = y.iter().sum::<f64>() / (n * data.p() as f64);
    let mut sxy = 0.0;
    let mut sxx = 0.0;
    for (i, &xi) in x.iter().enumerate() {
        let dx = xi - xbar;
        sxx += dx * dx * data.p() as f64;
        for p in 0..data.p() {
            sxy += dx * (y[(i, p)] - ybar);
        }
    }
    let slope = if sxx > 0.0 { sxy / sxx } else { 0.0 };
    (ybar - slope * xbar, slope)
}

/// Empirical-Bayes hyperparameters from intervention data.
pub fn derive_hyperparameters(data: &Dataset, opts: &HyperOptions) -> Result<Hyperparameters> {
    let x = data
        .doses()
        .ok_or_else(|| Error::Usage("hyperparameters need consumed quantities".into()))?;
    let labels = data.labels().expect("doses present");
    let (intercept, slope) = pooled_ols(data, x);
    let d = data.d();
    let n = data.n() as f64;
    let fit = fit_ordinal_cauchit_mle(&labels, data.y(), d)?;
    if !fit.converged {
        log::warn!("ordinal regression stopped at the iteration cap; using best iterate");
    }
    let hyp = Hyperparameters {
        m_alpha: intercept.max(0.0),
        m_beta: slope.max(0.0),
        tau_alpha: opts.tau_alpha,
        tau_beta: opts.tau_beta,
        sigma_alpha2: 1.0,
        nu_beta1: 2.0,
        nu_beta2: 3.0,
        nu_p1: 1.0,
        nu_p2: 3.0,
        nu_z1: (1..=d).map(|k| (d - k + 1) as f64 / 2.0).collect(),
        nu_z2: vec![n; d],
        m_gamma: fit.model.gamma,
        m_eta: fit.model.eta,
        kappa: opts.kappa,
        ordinal_converged: fit.converged,
    };
    hyp.validate()?;
    Ok(hyp)
}
