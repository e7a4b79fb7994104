//! Metropolis-within-Gibbs sampler.
//!
//! One sweep updates, in order: α and β, Σ, the hyperprior parameters
//! (μ_α, μ_β, σ_β²), the Cauchit parameters γ and η by random-walk
//! Metropolis, the weights π and allocations c, and finally z and Θ. Each
//! update sees the values written by the ones before it.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{
    derive_hyperparameters, initialize_state, scale_biomarkers, Dataset, HyperOptions,
    Hyperparameters, LatentDraw, ModelState, PosteriorChain, ThetaInit,
};
use crate::ordinal::{class_probability, weights_from_linear};
use crate::stats::{
    normal, sample_categorical, sample_inverse_gamma, sample_truncated_normal, InvGammaParams,
    RngStream, TruncNormalParams,
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SamplerConfig {
    pub n_iter: usize,
    pub n_burn: usize,
    pub thin: usize,
    /// Initial random-walk sd for each cutpoint.
    pub mh_step_gamma: f64,
    /// Initial random-walk sd for η_p, before division by the sd of biomarker p.
    pub mh_step_eta: f64,
    pub adapt_window: usize,
    pub target_acceptance: f64,
    /// Robbins–Monro step adaptation during burn-in.
    pub adapt: bool,
    pub seed: u64,
    /// Draw c_i from the normalized weights instead of taking the argmax.
    pub stochastic_allocation: bool,
    /// Keep z and c for every retained draw.
    pub store_latent: bool,
    pub theta_init: ThetaInit,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        SamplerConfig {
            n_iter: 30_000,
            n_burn: 6_000,
            thin: 1,
            mh_step_gamma: 0.5,
            mh_step_eta: 0.5,
            adapt_window: 100,
            target_acceptance: 0.3,
            adapt: true,
            seed: 0,
            stochastic_allocation: false,
            store_latent: true,
            theta_init: ThetaInit::default(),
        }
    }
}

impl SamplerConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_burn >= self.n_iter {
            return Err(Error::Parameter(format!(
                "burn-in ({}) must be smaller than the iteration count ({})",
                self.n_burn, self.n_iter
            )));
        }
        if self.thin == 0 || self.adapt_window == 0 {
            return Err(Error::Parameter(
                "thin and adapt_window must be at least 1".into(),
            ));
        }
        if !(self.mh_step_gamma > 0.0 && self.mh_step_eta > 0.0)
            || !self.mh_step_gamma.is_finite()
            || !self.mh_step_eta.is_finite()
        {
            return Err(Error::Parameter(
                "random-walk steps must be positive and finite".into(),
            ));
        }
        if !(self.target_acceptance > 0.0 && self.target_acceptance < 1.0) {
            return Err(Error::Parameter(
                "target acceptance must lie in (0, 1)".into(),
            ));
        }
        Ok(())
    }
}

/// Post-burn-in acceptance rates and the (frozen) random-walk steps.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct MhDiagnostics {
    pub acceptance_gamma: f64,
    pub acceptance_eta: f64,
    pub step_gamma: Vec<f64>,
    pub step_eta: Vec<f64>,
}

/// Random-walk standard deviations, one per coordinate.
#[derive(Debug, Clone, PartialEq)]
pub struct MhSteps {
    pub gamma: Vec<f64>,
    pub eta: Vec<f64>,
}

/// Which proposals were accepted in one γ/η sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct MhOutcome {
    pub gamma: Vec<bool>,
    pub eta: Vec<bool>,
}

fn residual_sums(state: &ModelState, data: &Dataset, p: usize) -> (f64, f64, f64) {
    let y = data.y().column(p);
    let (a, b) = (state.params.alpha[p], state.params.beta[p]);
    let mut s_ybz = 0.0;
    let mut s_zya = 0.0;
    let mut s_zz = 0.0;
    for (i, &z) in state.z.iter().enumerate() {
        s_ybz += y[i] - b * z;
        s_zya += z * (y[i] - a);
        s_zz += z * z;
    }
    (s_ybz, s_zya, s_zz)
}

/// Full conditional of α_p: 𝒩_[0,∞)(μ*, σ*²) with
/// σ*² = σ_p²σ_α²/(nσ_α² + σ_p²), μ* = σ*²(Σ(y − βz)/σ_p² + μ_α/σ_α²).
pub fn alpha_conditional(
    state: &ModelState,
    data: &Dataset,
    hyp: &Hyperparameters,
    p: usize,
) -> Result<TruncNormalParams> {
    let s2 = state.params.sigma2[p];
    let sa2 = hyp.sigma_alpha2;
    let (s_ybz, _, _) = residual_sums(state, data, p);
    let var = s2 * sa2 / (data.n() as f64 * sa2 + s2);
    let mean = var * (s_ybz / s2 + state.params.mu_alpha / sa2);
    TruncNormalParams::nonnegative(mean, var)
}

/// Full conditional of β_p: 𝒩_(0,∞)(μ*, σ*²) with
/// σ*² = σ_p²σ_β²/(σ_β²Σz² + σ_p²), μ* = σ*²(Σz(y − α)/σ_p² + μ_β/σ_β²).
pub fn beta_conditional(state: &ModelState, data: &Dataset, p: usize) -> Result<TruncNormalParams> {
    let s2 = state.params.sigma2[p];
    let sb2 = state.params.sigma_beta2;
    let (_, s_zya, s_zz) = residual_sums(state, data, p);
    let var = s2 * sb2 / (sb2 * s_zz + s2);
    let mean = var * (s_zya / s2 + state.params.mu_beta / sb2);
    TruncNormalParams::nonnegative(mean, var)
}

pub fn update_alpha_beta(
    state: &mut ModelState,
    data: &Dataset,
    hyp: &Hyperparameters,
    rng: &mut RngStream,
) -> Result<()> {
    for p in 0..data.p() {
        let a = alpha_conditional(state, data, hyp, p)?;
        state.params.alpha[p] = sample_truncated_normal(&a, rng)?;
        let b = beta_conditional(state, data, p)?;
        // support is the open half-line
        state.params.beta[p] = sample_truncated_normal(&b, rng)?.max(f64::MIN_POSITIVE);
    }
    Ok(())
}

/// Full conditional of σ_p²: InvΓ(n/2 + ν_P1, ν_P2 + ½Σ(y − α − βz)²).
pub fn sigma2_conditional(
    state: &ModelState,
    data: &Dataset,
    hyp: &Hyperparameters,
    p: usize,
) -> Result<InvGammaParams> {
    let y = data.y().column(p);
    let (a, b) = (state.params.alpha[p], state.params.beta[p]);
    let rss: f64 = state
        .z
        .iter()
        .enumerate()
        .map(|(i, z)| (y[i] - a - b * z).powi(2))
        .sum();
    InvGammaParams::new(data.n() as f64 / 2.0 + hyp.nu_p1, 0.5 * rss + hyp.nu_p2)
}

pub fn update_sigma_p(
    state: &mut ModelState,
    data: &Dataset,
    hyp: &Hyperparameters,
    rng: &mut RngStream,
) -> Result<()> {
    for p in 0..data.p() {
        let ig = sigma2_conditional(state, data, hyp, p)?;
        state.params.sigma2[p] = sample_inverse_gamma(&ig, rng)?;
    }
    Ok(())
}

/// 𝒩_[0,∞)(μ*, σ*²) with σ*² = τσ²/(τP + 1), μ* = σ*²(τΣg + m)/(τσ²).
fn hyper_mean_conditional(values: &[f64], m: f64, tau: f64, var: f64) -> Result<TruncNormalParams> {
    let p = values.len() as f64;
    let s: f64 = values.iter().sum();
    let post_var = tau * var / (tau * p + 1.0);
    let mean = post_var * (tau * s + m) / (tau * var);
    TruncNormalParams::nonnegative(mean, post_var)
}

pub fn mu_alpha_conditional(
    state: &ModelState,
    hyp: &Hyperparameters,
) -> Result<TruncNormalParams> {
    hyper_mean_conditional(
        &state.params.alpha,
        hyp.m_alpha,
        hyp.tau_alpha,
        hyp.sigma_alpha2,
    )
}

pub fn mu_beta_conditional(state: &ModelState, hyp: &Hyperparameters) -> Result<TruncNormalParams> {
    hyper_mean_conditional(
        &state.params.beta,
        hyp.m_beta,
        hyp.tau_beta,
        state.params.sigma_beta2,
    )
}

/// InvΓ((P + 1 + 2ν_β1)/2, ν_β2 + [τΣ(β − μ_β)² + (μ_β − m_β)²]/(2τ)).
pub fn sigma_beta2_conditional(
    state: &ModelState,
    hyp: &Hyperparameters,
) -> Result<InvGammaParams> {
    let prm = &state.params;
    let p = prm.p() as f64;
    let tau = hyp.tau_beta;
    let ss: f64 = prm.beta.iter().map(|b| (b - prm.mu_beta).powi(2)).sum();
    let scale = hyp.nu_beta2 + (tau * ss + (prm.mu_beta - hyp.m_beta).powi(2)) / (2.0 * tau);
    InvGammaParams::new((p + 1.0 + 2.0 * hyp.nu_beta1) / 2.0, scale)
}

pub fn update_nuisance(
    state: &mut ModelState,
    hyp: &Hyperparameters,
    rng: &mut RngStream,
) -> Result<()> {
    state.params.mu_alpha = sample_truncated_normal(&mu_alpha_conditional(state, hyp)?, rng)?;
    state.params.mu_beta = sample_truncated_normal(&mu_beta_conditional(state, hyp)?, rng)?;
    state.params.sigma_beta2 = sample_inverse_gamma(&sigma_beta2_conditional(state, hyp)?, rng)?;
    Ok(())
}

fn linear_predictors(eta: &[f64], data: &Dataset) -> Vec<f64> {
    let y = data.y();
    let mut lin = vec![0.0; data.n()];
    for (p, e) in eta.iter().enumerate() {
        for (i, l) in lin.iter_mut().enumerate() {
            *l += e * y[(i, p)];
        }
    }
    lin
}

/// Log target of the ordinal part restricted to observations in classes `lo..=hi`.
fn ordinal_loglik(gamma: &[f64], lin: &[f64], c: &[usize], lo: usize, hi: usize) -> f64 {
    c.iter()
        .zip(lin)
        .filter(|(ci, _)| (lo..=hi).contains(*ci))
        .map(|(&ci, &l)| class_probability(gamma, l, ci).ln())
        .sum()
}

/// Random-walk Metropolis for each γ_d, then each η_p.
///
/// The γ_d prior is 𝒩(m_γd, κ) truncated to `(m_γ,d−1, m_γ,d+1)`; proposals
/// outside it, or out of order with the current neighbours, are rejected.
pub fn update_gamma_eta(
    state: &mut ModelState,
    data: &Dataset,
    hyp: &Hyperparameters,
    steps: &MhSteps,
    rng: &mut RngStream,
) -> Result<MhOutcome> {
    let nc = state.params.gamma.len();
    let d = nc + 1;
    let kappa = hyp.kappa;
    let mut lin = linear_predictors(&state.params.eta, data);
    let mut out = MhOutcome {
        gamma: vec![false; nc],
        eta: vec![false; data.p()],
    };

    for k in 0..nc {
        let cur = state.params.gamma[k];
        let prop = cur + steps.gamma[k] * rng.standard_normal();
        let u = rng.uniform();
        let lo_prior = if k == 0 {
            f64::NEG_INFINITY
        } else {
            hyp.m_gamma[k - 1]
        };
        let hi_prior = if k + 1 == nc {
            f64::INFINITY
        } else {
            hyp.m_gamma[k + 1]
        };
        let lo_order = if k == 0 {
            f64::NEG_INFINITY
        } else {
            state.params.gamma[k - 1]
        };
        let hi_order = if k + 1 == nc {
            f64::INFINITY
        } else {
            state.params.gamma[k + 1]
        };
        if prop == cur {
            out.gamma[k] = true;
            continue;
        }
        if !(prop > lo_prior && prop < hi_prior && prop > lo_order && prop < hi_order) {
            continue;
        }
        let before = ordinal_loglik(&state.params.gamma, &lin, &state.c, k, (k + 1).min(d - 1));
        let m = hyp.m_gamma[k];
        let prior_cur = -(cur - m).powi(2) / (2.0 * kappa);
        let prior_prop = -(prop - m).powi(2) / (2.0 * kappa);
        state.params.gamma[k] = prop;
        let after = ordinal_loglik(&state.params.gamma, &lin, &state.c, k, (k + 1).min(d - 1));
        let log_ratio = after + prior_prop - before - prior_cur;
        if u.ln() < log_ratio {
            out.gamma[k] = true;
        } else {
            state.params.gamma[k] = cur;
        }
    }

    let y = data.y();
    let mut trial = vec![0.0; lin.len()];
    for p in 0..data.p() {
        let cur = state.params.eta[p];
        let prop = cur + steps.eta[p] * rng.standard_normal();
        let u = rng.uniform();
        if prop == cur {
            out.eta[p] = true;
            continue;
        }
        let delta = prop - cur;
        for (i, t) in trial.iter_mut().enumerate() {
            *t = lin[i] + delta * y[(i, p)];
        }
        let before = ordinal_loglik(&state.params.gamma, &lin, &state.c, 0, d - 1);
        let after = ordinal_loglik(&state.params.gamma, &trial, &state.c, 0, d - 1);
        let m = hyp.m_eta[p];
        let log_ratio = after - before - ((prop - m).powi(2) - (cur - m).powi(2)) / (2.0 * kappa);
        if u.ln() < log_ratio {
            state.params.eta[p] = prop;
            std::mem::swap(&mut lin, &mut trial);
            out.eta[p] = true;
        }
    }
    Ok(out)
}

/// `log 𝒩_[0,∞)(z | x, θ²)`.
pub(crate) fn log_component_density(z: f64, x: f64, theta2: f64) -> f64 {
    let sd = theta2.sqrt();
    normal::log_pdf((z - x) / sd) - sd.ln() - normal::log_cdf(x / sd)
}

/// Index maximizing `log_w`, ties to the smallest.
pub(crate) fn argmax(log_w: &[f64]) -> usize {
    let mut best = 0;
    for (k, v) in log_w.iter().enumerate().skip(1) {
        if *v > log_w[best] {
            best = k;
        }
    }
    best
}

/// Recompute π from γ, η, then set each c_i to the component maximizing
/// `π_id 𝒩_[0,∞)(z_i | X_d, θ_d²)` (or draw it from the normalized weights).
pub fn update_weights_allocations(
    state: &mut ModelState,
    data: &Dataset,
    stochastic: bool,
    rng: &mut RngStream,
) -> Result<()> {
    let d = data.d();
    let lin = linear_predictors(&state.params.eta, data);
    let mut w = vec![0.0; d];
    let mut lw = vec![0.0; d];
    for (i, &l) in lin.iter().enumerate() {
        weights_from_linear(&state.params.gamma, l, &mut w);
        for k in 0..d {
            state.pi[(i, k)] = w[k];
            lw[k] = w[k].ln()
                + log_component_density(state.z[i], data.levels()[k], state.params.theta2[k]);
        }
        state.c[i] = if stochastic {
            let top = lw.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let probs: Vec<f64> = lw.iter().map(|v| (v - top).exp()).collect();
            sample_categorical(&probs, rng)?
        } else {
            argmax(&lw)
        };
    }
    Ok(())
}

/// Full conditional of z_i given c_i = d: 𝒩_[0,∞)(μ*, θ*²) with
/// θ*² = (Σβ²/σ² + 1/θ_d²)⁻¹ and μ* = θ*²(Σβ(y − α)/σ² + X_d/θ_d²).
pub fn z_conditional(state: &ModelState, data: &Dataset, i: usize) -> Result<TruncNormalParams> {
    let prm = &state.params;
    let d = state.c[i];
    let y = data.y();
    let mut prec = 1.0 / prm.theta2[d];
    let mut lin = data.levels()[d] / prm.theta2[d];
    for p in 0..prm.p() {
        prec += prm.beta[p] * prm.beta[p] / prm.sigma2[p];
        lin += prm.beta[p] * (y[(i, p)] - prm.alpha[p]) / prm.sigma2[p];
    }
    let var = 1.0 / prec;
    TruncNormalParams::nonnegative(var * lin, var)
}

/// Full conditional of θ_d²: InvΓ(n_d/2 + ν_z1,d, ν_z2,d + ½Σ_{c_i=d}(z_i − X_d)²).
/// An empty component gives back the prior.
pub fn theta2_conditional(
    state: &ModelState,
    data: &Dataset,
    hyp: &Hyperparameters,
    d: usize,
) -> Result<InvGammaParams> {
    let x = data.levels()[d];
    let (mut nd, mut ss) = (0usize, 0.0);
    for (z, &c) in state.z.iter().zip(&state.c) {
        if c == d {
            nd += 1;
            ss += (z - x).powi(2);
        }
    }
    InvGammaParams::new(nd as f64 / 2.0 + hyp.nu_z1[d], hyp.nu_z2[d] + 0.5 * ss)
}

pub fn update_latent(
    state: &mut ModelState,
    data: &Dataset,
    hyp: &Hyperparameters,
    rng: &mut RngStream,
) -> Result<()> {
    for i in 0..state.n() {
        let tn = z_conditional(state, data, i)?;
        state.z[i] = sample_truncated_normal(&tn, rng)?;
    }
    for d in 0..data.d() {
        let ig = theta2_conditional(state, data, hyp, d)?;
        state.params.theta2[d] = sample_inverse_gamma(&ig, rng)?;
    }
    Ok(())
}

fn column_sd(y: &DMatrix<f64>, p: usize) -> f64 {
    let col: Vec<f64> = y.column(p).iter().copied().collect();
    let s = if col.len() > 1 {
        crate::stats::variance(&col).sqrt()
    } else {
        0.0
    };
    if s > 0.0 && s.is_finite() {
        s
    } else {
        1.0
    }
}

/// Optionally standardize the biomarkers, derive empirical-Bayes
/// hyperparameters on the (scaled) data and run one chain. The scaling is
/// recorded on the chain so new panels can be mapped the same way.
pub fn fit_model(
    data: &Dataset,
    opts: &HyperOptions,
    cfg: &SamplerConfig,
    scale: bool,
) -> Result<PosteriorChain> {
    let (work, scaling) = if scale {
        let (y, s) = scale_biomarkers(data.y())?;
        (data.with_biomarkers(y), Some(s))
    } else {
        (data.clone(), None)
    };
    let hyp = derive_hyperparameters(&work, opts)?;
    let mut chain = run_chain(&work, &hyp, cfg)?;
    chain.scaling = scaling;
    Ok(chain)
}

/// Run the sampler from the default initial state.
pub fn run_chain(
    data: &Dataset,
    hyp: &Hyperparameters,
    cfg: &SamplerConfig,
) -> Result<PosteriorChain> {
    cfg.validate()?;
    hyp.validate()?;
    let mut rng = RngStream::new(cfg.seed);
    let state = initialize_state(data, hyp, cfg.theta_init, &mut rng)?;
    run_from_state(data, hyp, cfg, state, &mut rng)
}

/// Run the sampler from a given state. `data` may lack doses; they are not
/// used after initialization.
pub fn run_from_state(
    data: &Dataset,
    hyp: &Hyperparameters,
    cfg: &SamplerConfig,
    mut state: ModelState,
    rng: &mut RngStream,
) -> Result<PosteriorChain> {
    cfg.validate()?;
    state.check_invariants()?;
    if state.n() != data.n() || state.params.p() != data.p() || state.params.d() != data.d() {
        return Err(Error::Dimension {
            what: "state vs data",
            expected: data.n(),
            found: state.n(),
        });
    }
    let (p, nc) = (data.p(), data.d() - 1);
    let mut steps = MhSteps {
        gamma: vec![cfg.mh_step_gamma; nc],
        eta: (0..p)
            .map(|k| cfg.mh_step_eta / column_sd(data.y(), k))
            .collect(),
    };
    let mut win_g = vec![0usize; nc];
    let mut win_e = vec![0usize; p];
    let mut windows = 0usize;
    let (mut acc_g, mut acc_e, mut kept_sweeps) = (0usize, 0usize, 0usize);
    let retained = (cfg.n_iter - cfg.n_burn) / cfg.thin;
    let mut draws = Vec::with_capacity(retained);
    let mut latent = cfg.store_latent.then(|| Vec::with_capacity(retained));

    for t in 1..=cfg.n_iter {
        update_alpha_beta(&mut state, data, hyp, rng)?;
        update_sigma_p(&mut state, data, hyp, rng)?;
        update_nuisance(&mut state, hyp, rng)?;
        let mh = update_gamma_eta(&mut state, data, hyp, &steps, rng)?;
        update_weights_allocations(&mut state, data, cfg.stochastic_allocation, rng)?;
        update_latent(&mut state, data, hyp, rng)?;

        if t <= cfg.n_burn {
            if cfg.adapt {
                for (w, a) in win_g.iter_mut().zip(&mh.gamma) {
                    *w += usize::from(*a);
                }
                for (w, a) in win_e.iter_mut().zip(&mh.eta) {
                    *w += usize::from(*a);
                }
                if t % cfg.adapt_window == 0 {
                    windows += 1;
                    let gain = 1.0 / (windows as f64).sqrt();
                    let len = cfg.adapt_window as f64;
                    for (s, w) in steps.gamma.iter_mut().zip(win_g.iter_mut()) {
                        *s *= (gain * (*w as f64 / len - cfg.target_acceptance)).exp();
                        *w = 0;
                    }
                    for (s, w) in steps.eta.iter_mut().zip(win_e.iter_mut()) {
                        *s *= (gain * (*w as f64 / len - cfg.target_acceptance)).exp();
                        *w = 0;
                    }
                }
            }
            continue;
        }
        kept_sweeps += 1;
        acc_g += mh.gamma.iter().filter(|a| **a).count();
        acc_e += mh.eta.iter().filter(|a| **a).count();
        if (t - cfg.n_burn) % cfg.thin == 0 {
            debug_assert!(state.check_invariants().is_ok());
            draws.push(state.params.clone());
            if let Some(l) = latent.as_mut() {
                l.push(LatentDraw {
                    z: state.z.clone(),
                    c: state.c.clone(),
                });
            }
        }
    }
    let rate = |acc: usize, k: usize| {
        if k == 0 {
            0.0
        } else {
            acc as f64 / (k * kept_sweeps) as f64
        }
    };
    let diagnostics = MhDiagnostics {
        acceptance_gamma: rate(acc_g, nc),
        acceptance_eta: rate(acc_e, p),
        step_gamma: steps.gamma,
        step_eta: steps.eta,
    };
    Ok(PosteriorChain {
        seed: cfg.seed,
        n_iter: cfg.n_iter,
        n_burn: cfg.n_burn,
        thin: cfg.thin,
        fingerprint: data.fingerprint(),
        n_obs: data.n(),
        levels: data.levels().to_vec(),
        scaling: None,
        config: cfg.clone(),
        hyper: hyp.clone(),
        diagnostics,
        draws,
        latent,
    })
}
