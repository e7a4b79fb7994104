//! Posterior predictive inference of intake from biomarkers alone.

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{Dataset, Hyperparameters, ModelState, Params, PosteriorChain};
use crate::ordinal::weights_from_linear;
use crate::sampler::{argmax, log_component_density, run_from_state, SamplerConfig};
use crate::stats::{
    quantile_sorted, sample_categorical, sample_truncated_normal, sorted_copy, RngStream,
    TruncNormalParams,
};

/// Intake implied by one observation's biomarkers alone under one draw.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PredictiveMoments {
    pub mu_z: f64,
    pub sigma_z2: f64,
}

/// σ_z² = (Σ β_p²/σ_p²)⁻¹ and μ_z = σ_z² Σ β_p (y*_p − α_p)/σ_p².
pub fn predictive_moments(y_star: &[f64], params: &Params) -> Result<PredictiveMoments> {
    if y_star.len() != params.p() {
        return Err(Error::Dimension {
            what: "biomarkers per observation",
            expected: params.p(),
            found: y_star.len(),
        });
    }
    let mut info = 0.0;
    let mut score = 0.0;
    for p in 0..params.p() {
        info += params.beta[p] * params.beta[p] / params.sigma2[p];
        score += params.beta[p] * (y_star[p] - params.alpha[p]) / params.sigma2[p];
    }
    if !(info > 0.0) {
        return Err(Error::DegenerateInformation);
    }
    let sigma_z2 = 1.0 / info;
    Ok(PredictiveMoments {
        mu_z: sigma_z2 * score,
        sigma_z2,
    })
}

/// Component-d predictive: 𝒩_[0,∞)((μ_z θ² + X σ_z²)/(σ_z² + θ²), (1/θ² + 1/σ_z²)⁻¹).
/// With no biomarker information it is the component prior itself.
pub fn component_predictive(
    m: Option<PredictiveMoments>,
    x: f64,
    theta2: f64,
) -> Result<TruncNormalParams> {
    match m {
        Some(m) => {
            let var = 1.0 / (1.0 / theta2 + 1.0 / m.sigma_z2);
            let mean = (m.mu_z * theta2 + x * m.sigma_z2) / (m.sigma_z2 + theta2);
            TruncNormalParams::nonnegative(mean, var)
        }
        None => TruncNormalParams::nonnegative(x, theta2),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictiveResult {
    pub draws: Vec<f64>,
    pub median: f64,
    pub ci95: (f64, f64),
    /// Fraction of draws allocated to each component.
    pub component_freq: Vec<f64>,
}

/// Median and central 95% interval (type-7 quantiles), plus component frequencies.
pub fn summarize_predictive(
    draws: &[f64],
    components: &[usize],
    d: usize,
) -> Result<PredictiveResult> {
    if draws.is_empty() {
        return Err(Error::Data("no predictive draws to summarize".into()));
    }
    let s = sorted_copy(draws);
    let mut freq = vec![0.0; d];
    for &c in components {
        freq[c] += 1.0;
    }
    let total = components.len().max(1) as f64;
    for f in &mut freq {
        *f /= total;
    }
    Ok(PredictiveResult {
        draws: draws.to_vec(),
        median: quantile_sorted(&s, 0.5),
        ci95: (quantile_sorted(&s, 0.025), quantile_sorted(&s, 0.975)),
        component_freq: freq,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PredictOptions {
    pub seed: u64,
    /// Draw c* from the normalized weights instead of the argmax.
    pub stochastic_allocation: bool,
}

impl Default for PredictOptions {
    fn default() -> Self {
        PredictOptions {
            seed: 0,
            stochastic_allocation: false,
        }
    }
}

/// Map raw biomarker rows into the chain's scale.
pub fn prepare_new_biomarkers(raw: &DMatrix<f64>, chain: &PosteriorChain) -> Result<DMatrix<f64>> {
    if raw.ncols() != chain.p() {
        return Err(Error::Dimension {
            what: "biomarker columns",
            expected: chain.p(),
            found: raw.ncols(),
        });
    }
    match &chain.scaling {
        Some(s) => s.apply(raw),
        None => Ok(raw.clone()),
    }
}

fn predict_one(
    y: &[f64],
    chain: &PosteriorChain,
    rng: &mut RngStream,
    stochastic: bool,
) -> Result<PredictiveResult> {
    let d = chain.d();
    let levels = &chain.levels;
    let mut w = vec![0.0; d];
    let mut lw = vec![0.0; d];
    let mut draws = Vec::with_capacity(chain.len());
    let mut comps = Vec::with_capacity(chain.len());
    let mut prev: Option<f64> = None;
    for prm in &chain.draws {
        let m = match predictive_moments(y, prm) {
            Ok(m) => Some(m),
            Err(Error::DegenerateInformation) => None,
            Err(e) => return Err(e),
        };
        let lin: f64 = prm.eta.iter().zip(y).map(|(e, v)| e * v).sum();
        weights_from_linear(&prm.gamma, lin, &mut w);
        let z_prev = prev.unwrap_or_else(|| w.iter().zip(levels).map(|(p, x)| p * x).sum());
        for k in 0..d {
            lw[k] = w[k].ln() + log_component_density(z_prev, levels[k], prm.theta2[k]);
        }
        let c = if stochastic {
            let top = lw.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let probs: Vec<f64> = lw.iter().map(|v| (v - top).exp()).collect();
            sample_categorical(&probs, rng)?
        } else {
            argmax(&lw)
        };
        let tn = component_predictive(m, levels[c], prm.theta2[c])?;
        let z = sample_truncated_normal(&tn, rng)?;
        draws.push(z);
        comps.push(c);
        prev = Some(z);
    }
    summarize_predictive(&draws, &comps, d)
}

/// Replay the stored chain: for each retained Ω draw, pick c* by the
/// weighted-density argmax at the previous z*, then draw z* from that
/// component's predictive. Observation j uses RNG sub-stream j, so results
/// do not depend on scheduling.
pub fn sample_predictive(
    y_star: &DMatrix<f64>,
    chain: &PosteriorChain,
    opts: &PredictOptions,
) -> Result<Vec<PredictiveResult>> {
    if chain.is_empty() {
        return Err(Error::Data("chain holds no draws".into()));
    }
    if y_star.ncols() != chain.p() {
        return Err(Error::Dimension {
            what: "biomarker columns",
            expected: chain.p(),
            found: y_star.ncols(),
        });
    }
    (0..y_star.nrows())
        .into_par_iter()
        .map(|j| {
            let y: Vec<f64> = y_star.row(j).iter().copied().collect();
            let mut rng = RngStream::new(opts.seed).substream(j as u64);
            predict_one(&y, chain, &mut rng, opts.stochastic_allocation)
        })
        .collect()
}

/// Continue the sampler on the training data with the new rows appended,
/// so Ω is resampled given y* as well. Returns the appended rows' results.
pub fn sample_predictive_joint(
    train: &Dataset,
    y_star: &DMatrix<f64>,
    hyp: &Hyperparameters,
    cfg: &SamplerConfig,
) -> Result<Vec<PredictiveResult>> {
    if y_star.ncols() != train.p() {
        return Err(Error::Dimension {
            what: "biomarker columns",
            expected: train.p(),
            found: y_star.ncols(),
        });
    }
    cfg.validate()?;
    let (n, m, d) = (train.n(), y_star.nrows(), train.d());
    let mut rng = RngStream::new(cfg.seed);
    let base = crate::model::initialize_state(train, hyp, cfg.theta_init, &mut rng)?;
    let all = DMatrix::from_fn(n + m, train.p(), |i, p| {
        if i < n {
            train.y()[(i, p)]
        } else {
            y_star[(i - n, p)]
        }
    });
    // scaled new rows may dip below zero, so only shapes are checked here
    let combined = Dataset::unchecked(all, None, train.levels().to_vec());
    let mut z = base.z.clone();
    let mut c = base.c.clone();
    let mut w = vec![0.0; d];
    for j in 0..m {
        let lin: f64 = base
            .params
            .eta
            .iter()
            .enumerate()
            .map(|(p, e)| e * y_star[(j, p)])
            .sum();
        weights_from_linear(&base.params.gamma, lin, &mut w);
        let zj: f64 = w.iter().zip(train.levels()).map(|(p, x)| p * x).sum();
        let lw: Vec<f64> = (0..d)
            .map(|k| {
                w[k].ln() + log_component_density(zj, train.levels()[k], base.params.theta2[k])
            })
            .collect();
        z.push(zj);
        c.push(argmax(&lw));
    }
    let state = ModelState {
        params: base.params,
        z,
        c,
        pi: DMatrix::from_element(n + m, d, 1.0 / d as f64),
    };
    let cfg = SamplerConfig {
        store_latent: true,
        ..cfg.clone()
    };
    let chain = run_from_state(&combined, hyp, &cfg, state, &mut rng)?;
    let latent = chain.latent.as_ref().expect("latent stored");
    (0..m)
        .map(|j| {
            let draws: Vec<f64> = latent.iter().map(|l| l.z[n + j]).collect();
            let comps: Vec<usize> = latent.iter().map(|l| l.c[n + j]).collect();
            summarize_predictive(&draws, &comps, d)
        })
        .collect()
}
