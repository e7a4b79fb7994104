use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::{Dataset, Hyperparameters};
use crate::error::{Error, Result};
use crate::stats::{sample_truncated_normal, RngStream, TruncNormalParams};

/// The global parameters Ω of one draw.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Params {
    pub alpha: Vec<f64>,
    pub beta: Vec<f64>,
    pub sigma2: Vec<f64>,
    pub mu_alpha: f64,
    pub mu_beta: f64,
    pub sigma_beta2: f64,
    pub theta2: Vec<f64>,
    pub gamma: Vec<f64>,
    pub eta: Vec<f64>,
}

impl Params {
    pub fn p(&self) -> usize {
        self.alpha.len()
    }

    pub fn d(&self) -> usize {
        self.theta2.len()
    }

    pub fn check_invariants(&self) -> Result<()> {
        let fail = |m: String| Err(Error::Parameter(m));
        let p = self.p();
        if self.beta.len() != p || self.sigma2.len() != p || self.eta.len() != p {
            return fail("per-biomarker parameter lengths differ".into());
        }
        if self.gamma.len() + 1 != self.d() {
            return fail("gamma must have D - 1 entries".into());
        }
        if let Some(k) = self
            .alpha
            .iter()
            .position(|a| !(*a >= 0.0) || !a.is_finite())
        {
            return fail(format!("alpha[{k}] = {} is not nonnegative", self.alpha[k]));
        }
        if let Some(k) = self.beta.iter().position(|b| !(*b > 0.0) || !b.is_finite()) {
            return fail(format!("beta[{k}] = {} is not positive", self.beta[k]));
        }
        if let Some(k) = self
            .sigma2
            .iter()
            .position(|s| !(*s > 0.0) || !s.is_finite())
        {
            return fail(format!("sigma2[{k}] = {} is not positive", self.sigma2[k]));
        }
        if let Some(k) = self
            .theta2
            .iter()
            .position(|t| !(*t > 0.0) || !t.is_finite())
        {
            return fail(format!("theta2[{k}] = {} is not positive", self.theta2[k]));
        }
        if !(self.mu_alpha >= 0.0 && self.mu_beta >= 0.0 && self.sigma_beta2 > 0.0) {
            return fail("hyperprior parameters out of range".into());
        }
        if self.gamma.iter().any(|g| !g.is_finite())
            || self.gamma.windows(2).any(|w| !(w[0] < w[1]))
        {
            return fail("gamma must be finite and strictly increasing".into());
        }
        if self.eta.iter().any(|e| !e.is_finite()) {
            return fail("eta must be finite".into());
        }
        Ok(())
    }
}

/// One full sampler state: Ω plus the latent intakes, allocations and weights.
///
/// `c` holds zero-based component indices. `pi` is `n x D` with simplex rows.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelState {
    pub params: Params,
    pub z: Vec<f64>,
    pub c: Vec<usize>,
    pub pi: DMatrix<f64>,
}

impl ModelState {
    pub fn n(&self) -> usize {
        self.z.len()
    }

    pub fn check_invariants(&self) -> Result<()> {
        self.params.check_invariants()?;
        let d = self.params.d();
        if self.c.len() != self.n() || self.pi.nrows() != self.n() || self.pi.ncols() != d {
            return Err(Error::Parameter("latent state dimensions disagree".into()));
        }
        if let Some(i) = self.z.iter().position(|z| !(*z >= 0.0) || !z.is_finite()) {
            return Err(Error::Parameter(format!(
                "z[{i}] = {} is not nonnegative",
                self.z[i]
            )));
        }
        if let Some(i) = self.c.iter().position(|&c| c >= d) {
            return Err(Error::Parameter(format!(
                "c[{i}] = {} out of range",
                self.c[i]
            )));
        }
        for (i, row) in self.pi.row_iter().enumerate() {
            let s: f64 = row.iter().sum();
            if (s - 1.0).abs() > 1e-10 || row.iter().any(|v| !(*v >= 0.0)) {
                return Err(Error::Parameter(format!(
                    "pi row {i} is not a simplex (sum {s})"
                )));
            }
        }
        Ok(())
    }
}

/// How the component variances start.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ThetaInit {
    /// Every θ_d² starts at the given value.
    Fixed(f64),
    /// Moment formula from per-dose biomarker variances, clamped to `[1, 100²]`.
    Moments,
}

impl Default for ThetaInit {
    fn default() -> Self {
        ThetaInit::Fixed(25.0)
    }
}

/// Per-biomarker least-squares line through the per-dose means `(X_d, ȳ_pd)`.
fn per_dose_lines(data: &Dataset, labels: &[usize]) -> Result<Vec<(f64, f64)>> {
    let d = data.d();
    let mut counts = vec![0usize; d];
    for &l in labels {
        counts[l] += 1;
    }
    let present: Vec<usize> = (0..d).filter(|&k| counts[k] > 0).collect();
    if present.len() < 2 {
        return Err(Error::Rank(format!(
            "need at least 2 distinct doses, found {}",
            present.len()
        )));
    }
    let xs: Vec<f64> = present.iter().map(|&k| data.levels()[k]).collect();
    let m = xs.len() as f64;
    let xbar = xs.iter().sum::<f64>() / m;
    let sxx: f64 = xs.iter().map(|x| (x - xbar).powi(2)).sum();
    let y = data.y();
    let mut out = Vec::with_capacity(data.p());
    for p in 0..data.p() {
        let mut sums = vec![0.0; d];
        for (i, &l) in labels.iter().enumerate() {
            sums[l] += y[(i, p)];
        }
        let means: Vec<f64> = present
            .iter()
            .map(|&k| sums[k] / counts[k] as f64)
            .collect();
        let ybar = means.iter().sum::<f64>() / m;
        let sxy: f64 = xs
            .iter()
            .zip(&means)
            .map(|(x, v)| (x - xbar) * (v - ybar))
            .sum();
        let slope = sxy / sxx;
        out.push((ybar - slope * xbar, slope));
    }
    Ok(out)
}

fn column_variance(data: &Dataset, p: usize) -> f64 {
    let col = data.y().column(p);
    let n = col.len() as f64;
    if n < 2.0 {
        return 0.0;
    }
    let m = col.iter().sum::<f64>() / n;
    col.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (n - 1.0)
}

/// Starting state for the sampler.
///
/// α, β come from per-dose means; Σ from the marginal variance minus the
/// intake-driven part; z_i is drawn around its own dose. Every value is
/// clamped into its prior support so the result always satisfies the
/// [`ModelState`] invariants.
pub fn initialize_state(
    data: &Dataset,
    hyp: &Hyperparameters,
    theta_init: ThetaInit,
    rng: &mut RngStream,
) -> Result<ModelState> {
    let labels = data
        .labels()
        .ok_or_else(|| Error::Usage("initialization needs consumed quantities".into()))?;
    let (n, p, d) = (data.n(), data.p(), data.d());
    if hyp.p() != p || hyp.d() != d {
        return Err(Error::Dimension {
            what: "hyperparameters vs data",
            expected: p,
            found: hyp.p(),
        });
    }
    let lines = per_dose_lines(data, &labels)?;
    let alpha: Vec<f64> = lines.iter().map(|l| l.0.max(0.0)).collect();
    let beta: Vec<f64> = lines
        .iter()
        .map(|l| if l.1 > 1e-6 { l.1 } else { 1e-6 })
        .collect();
    let sigma2: Vec<f64> = (0..p)
        .map(|k| {
            let v = column_variance(data, k);
            let floor = (1e-4 * v).max(1e-8);
            (v - beta[k] * beta[k] / d as f64).max(floor)
        })
        .collect();
    let theta2 = match theta_init {
        ThetaInit::Fixed(t) => {
            if !(t > 0.0 && t.is_finite()) {
                return Err(Error::Parameter(format!(
                    "initial theta2 must be positive, got {t}"
                )));
            }
            vec![t; d]
        }
        ThetaInit::Moments => moment_theta2(data, &labels, hyp, &sigma2),
    };
    let mut z = Vec::with_capacity(n);
    for &l in &labels {
        let tn = TruncNormalParams::nonnegative(data.levels()[l], theta2[l])?;
        z.push(sample_truncated_normal(&tn, rng)?);
    }
    let state = ModelState {
        params: Params {
            alpha,
            beta,
            sigma2,
            mu_alpha: hyp.m_alpha,
            mu_beta: hyp.m_beta,
            sigma_beta2: hyp.sigma_beta2_prior_mean(),
            theta2,
            gamma: hyp.m_gamma.clone(),
            eta: hyp.m_eta.clone(),
        },
        z,
        c: labels,
        pi: DMatrix::from_element(n, d, 1.0 / d as f64),
    };
    state.check_invariants()?;
    Ok(state)
}

/// θ_d² = (1/P) Σ_p (V̂(Y_pd) − σ_α² − σ_p²) / σ_β², where V̂(Y_pd) is the
/// variance of column p with entries outside dose d zeroed.
fn moment_theta2(
    data: &Dataset,
    labels: &[usize],
    hyp: &Hyperparameters,
    sigma2: &[f64],
) -> Vec<f64> {
    let (n, p) = (data.n(), data.p());
    let sb2 = hyp.sigma_beta2_prior_mean();
    (0..data.d())
        .map(|k| {
            let mut acc = 0.0;
            for col in 0..p {
                let masked: Vec<f64> = (0..n)
                    .map(|i| {
                        if labels[i] == k {
                            data.y()[(i, col)]
                        } else {
                            0.0
                        }
                    })
                    .collect();
                let v = crate::stats::variance(&masked);
                acc += (v - hyp.sigma_alpha2 - sigma2[col]) / sb2;
            }
            let t = acc / p as f64;
            if t.is_finite() {
                t.clamp(1.0, 1e4)
            } else {
                1.0
            }
        })
        .collect()
}
