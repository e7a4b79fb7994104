//! Independent oracles for the sampler's closed-form conditionals.
//!
//! Every kernel here is written from the model definition, not from the
//! sampler's algebra: prior density times likelihood, normalized on a grid.
//! Child-prior truncation constants are left out of the hyperparameter and
//! component-variance kernels, which is the target the conjugate updates
//! sample.
#![allow(dead_code)]

use multimarker::model::{Dataset, Hyperparameters, ModelState, Params};
use multimarker::sampler::{
    alpha_conditional, beta_conditional, mu_alpha_conditional, mu_beta_conditional,
    sigma2_conditional, sigma_beta2_conditional, theta2_conditional, z_conditional,
};
use multimarker::stats::{
    log_density_truncated_normal, sample_inverse_gamma, sample_truncated_normal, InvGammaParams,
    RngStream, TruncNormalParams,
};
use nalgebra::DMatrix;
use statrs::distribution::{ContinuousCDF, InverseGamma, Normal};

const LN_2PI: f64 = 1.837_877_066_409_345_5;

pub fn ln_normal(x: f64, mean: f64, var: f64) -> f64 {
    -0.5 * (LN_2PI + var.ln() + (x - mean).powi(2) / var)
}

pub fn ln_invgamma_kernel(x: f64, shape: f64, scale: f64) -> f64 {
    -(shape + 1.0) * x.ln() - scale / x
}

pub struct Case {
    pub data: Dataset,
    pub hyp: Hyperparameters,
    pub state: ModelState,
}

/// Random but well-conditioned data, state and hyperparameters.
pub fn random_case(seed: u64) -> Case {
    let mut rng = RngStream::new(seed ^ 0x5eed);
    let mut u = |a: f64, b: f64| a + (b - a) * rng.uniform();
    let n = u(5.0, 30.0) as usize;
    let p = u(1.0, 5.0) as usize;
    let d = u(2.0, 5.0) as usize;
    let mut levels = vec![u(10.0, 40.0)];
    for _ in 1..d {
        let last = *levels.last().unwrap();
        levels.push(last + u(20.0, 100.0));
    }
    let c: Vec<usize> = (0..n).map(|i| i % d).collect();
    let alpha: Vec<f64> = (0..p).map(|_| u(0.0, 5.0)).collect();
    let beta: Vec<f64> = (0..p).map(|_| u(0.05, 1.0)).collect();
    let sigma2: Vec<f64> = (0..p).map(|_| u(0.5, 4.0)).collect();
    let theta2: Vec<f64> = (0..d).map(|_| u(20.0, 200.0)).collect();
    let z: Vec<f64> = c
        .iter()
        .map(|&k| (levels[k] + u(-15.0, 15.0)).abs())
        .collect();
    let mut gamma: Vec<f64> = (0..d - 1).map(|_| u(-3.0, 3.0)).collect();
    gamma.sort_by(f64::total_cmp);
    let eta: Vec<f64> = (0..p).map(|_| u(-0.05, 0.05)).collect();
    let mut vals = Vec::with_capacity(n * p);
    for i in 0..n {
        for k in 0..p {
            vals.push((alpha[k] + beta[k] * z[i] + u(-2.0, 2.0) * sigma2[k].sqrt()).abs());
        }
    }
    let y = DMatrix::from_row_slice(n, p, &vals);
    let doses = c.iter().map(|&k| levels[k]).collect();
    let data = Dataset::new(y, Some(doses), levels).unwrap();
    let mut m_gamma: Vec<f64> = (0..d - 1).map(|_| u(-3.0, 3.0)).collect();
    m_gamma.sort_by(f64::total_cmp);
    let hyp = Hyperparameters {
        m_alpha: u(0.0, 5.0),
        m_beta: u(0.0, 1.0),
        tau_alpha: u(0.5, 3.0),
        tau_beta: u(0.5, 3.0),
        sigma_alpha2: 1.0,
        nu_beta1: 2.0,
        nu_beta2: 3.0,
        nu_p1: 1.0,
        nu_p2: 3.0,
        nu_z1: (1..=d).map(|k| (d - k + 1) as f64 / 2.0).collect(),
        nu_z2: vec![n as f64; d],
        m_gamma,
        m_eta: vec![0.0; p],
        kappa: 2.0,
        ordinal_converged: true,
    };
    let params = Params {
        alpha,
        beta,
        sigma2,
        mu_alpha: u(0.5, 3.0),
        mu_beta: u(0.05, 1.0),
        sigma_beta2: u(0.1, 2.0),
        theta2,
        gamma,
        eta,
    };
    let state = ModelState {
        params,
        z,
        c,
        pi: DMatrix::from_element(n, d, 1.0 / d as f64),
    };
    state.check_invariants().unwrap();
    Case { data, hyp, state }
}

fn logsumexp(v: &[f64]) -> f64 {
    let m = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    m + v.iter().map(|x| (x - m).exp()).sum::<f64>().ln()
}

const GRID: usize = 40_000;

/// Total variation between the implemented truncated normal and a
/// grid-normalized log kernel.
pub fn tv_truncnorm(imp: &TruncNormalParams, log_kernel: impl Fn(f64) -> f64) -> f64 {
    let sd = imp.variance.sqrt();
    let lo = imp.lower.max(imp.mean - 12.0 * sd);
    let hi = imp.upper.min(imp.mean.max(lo) + 12.0 * sd);
    let h = (hi - lo) / GRID as f64;
    let xs: Vec<f64> = (0..GRID).map(|k| lo + (k as f64 + 0.5) * h).collect();
    let lk: Vec<f64> = xs.iter().map(|&x| log_kernel(x)).collect();
    let norm = logsumexp(&lk) + h.ln();
    0.5 * xs
        .iter()
        .zip(&lk)
        .map(|(&x, &l)| {
            ((l - norm).exp() - log_density_truncated_normal(x, imp).unwrap().exp()).abs() * h
        })
        .sum::<f64>()
}

/// Same on a log-spaced grid for inverse-gamma conditionals.
pub fn tv_invgamma(imp: &InvGammaParams, log_kernel: impl Fn(f64) -> f64) -> f64 {
    let mode = (imp.scale / (imp.shape + 1.0)).ln();
    let w = 10.0 / imp.shape.sqrt() + 2.0;
    let (lo, hi) = (mode - w, mode + w + 25.0 / imp.shape);
    let h = (hi - lo) / GRID as f64;
    let us: Vec<f64> = (0..GRID).map(|k| lo + (k as f64 + 0.5) * h).collect();
    // density of u = ln x carries the Jacobian x
    let lk: Vec<f64> = us.iter().map(|&u| log_kernel(u.exp()) + u).collect();
    let norm = logsumexp(&lk) + h.ln();
    0.5 * us
        .iter()
        .zip(&lk)
        .map(|(&u, &l)| ((l - norm).exp() - (imp.log_density(u.exp()) + u).exp()).abs() * h)
        .sum::<f64>()
}

fn with_param(case: &Case, f: impl FnOnce(&mut Params)) -> ModelState {
    let mut s = case.state.clone();
    f(&mut s.params);
    s
}

fn loglik_p(case: &Case, s: &ModelState, p: usize) -> f64 {
    let y = case.data.y();
    let prm = &s.params;
    (0..case.data.n())
        .map(|i| {
            ln_normal(
                y[(i, p)],
                prm.alpha[p] + prm.beta[p] * s.z[i],
                prm.sigma2[p],
            )
        })
        .sum()
}

/// Largest TV over all sites of every closed-form conditional, by name.
pub fn conjugacy_tvs(case: &Case) -> Vec<(&'static str, f64)> {
    let (data, hyp, st) = (&case.data, &case.hyp, &case.state);
    let prm = &st.params;
    let (p_count, d_count) = (data.p(), data.d());
    let mut out = Vec::new();

    let mut worst = 0.0f64;
    for p in 0..p_count {
        let imp = alpha_conditional(st, data, hyp, p).unwrap();
        worst = worst.max(tv_truncnorm(&imp, |a| {
            let s = with_param(case, |q| q.alpha[p] = a);
            ln_normal(a, prm.mu_alpha, hyp.sigma_alpha2) + loglik_p(case, &s, p)
        }));
    }
    out.push(("alpha", worst));

    let mut worst = 0.0f64;
    for p in 0..p_count {
        let imp = beta_conditional(st, data, p).unwrap();
        worst = worst.max(tv_truncnorm(&imp, |b| {
            let s = with_param(case, |q| q.beta[p] = b);
            ln_normal(b, prm.mu_beta, prm.sigma_beta2) + loglik_p(case, &s, p)
        }));
    }
    out.push(("beta", worst));

    let mut worst = 0.0f64;
    for p in 0..p_count {
        let imp = sigma2_conditional(st, data, hyp, p).unwrap();
        worst = worst.max(tv_invgamma(&imp, |v| {
            let s = with_param(case, |q| q.sigma2[p] = v);
            ln_invgamma_kernel(v, hyp.nu_p1, hyp.nu_p2) + loglik_p(case, &s, p)
        }));
    }
    out.push(("sigma2", worst));

    let imp = mu_alpha_conditional(st, hyp).unwrap();
    out.push((
        "mu_alpha",
        tv_truncnorm(&imp, |m| {
            ln_normal(m, hyp.m_alpha, hyp.tau_alpha * hyp.sigma_alpha2)
                + prm
                    .alpha
                    .iter()
                    .map(|a| ln_normal(*a, m, hyp.sigma_alpha2))
                    .sum::<f64>()
        }),
    ));

    let imp = mu_beta_conditional(st, hyp).unwrap();
    out.push((
        "mu_beta",
        tv_truncnorm(&imp, |m| {
            ln_normal(m, hyp.m_beta, hyp.tau_beta * prm.sigma_beta2)
                + prm
                    .beta
                    .iter()
                    .map(|b| ln_normal(*b, m, prm.sigma_beta2))
                    .sum::<f64>()
        }),
    ));

    let imp = sigma_beta2_conditional(st, hyp).unwrap();
    out.push((
        "sigma_beta2",
        tv_invgamma(&imp, |v| {
            ln_invgamma_kernel(v, hyp.nu_beta1, hyp.nu_beta2)
                + ln_normal(prm.mu_beta, hyp.m_beta, hyp.tau_beta * v)
                + prm
                    .beta
                    .iter()
                    .map(|b| ln_normal(*b, prm.mu_beta, v))
                    .sum::<f64>()
        }),
    ));

    let mut worst = 0.0f64;
    let y = data.y();
    for i in 0..data.n() {
        let imp = z_conditional(st, data, i).unwrap();
        let k = st.c[i];
        worst = worst.max(tv_truncnorm(&imp, |z| {
            ln_normal(z, data.levels()[k], prm.theta2[k])
                + (0..p_count)
                    .map(|p| ln_normal(y[(i, p)], prm.alpha[p] + prm.beta[p] * z, prm.sigma2[p]))
                    .sum::<f64>()
        }));
    }
    out.push(("z", worst));

    let mut worst = 0.0f64;
    for k in 0..d_count {
        let imp = theta2_conditional(st, data, hyp, k).unwrap();
        let x = data.levels()[k];
        worst = worst.max(tv_invgamma(&imp, |t| {
            ln_invgamma_kernel(t, hyp.nu_z1[k], hyp.nu_z2[k])
                + st.z
                    .iter()
                    .zip(&st.c)
                    .filter(|(_, &c)| c == k)
                    .map(|(z, _)| ln_normal(*z, x, t))
                    .sum::<f64>()
        }));
    }
    out.push(("theta2", worst));
    out
}

/// Largest TV per conditional across `states` random cases.
pub fn conjugacy_suite(states: u64) -> Vec<(&'static str, f64)> {
    let mut worst: Vec<(&'static str, f64)> = Vec::new();
    for seed in 0..states {
        for (name, tv) in conjugacy_tvs(&random_case(seed)) {
            match worst.iter_mut().find(|(n, _)| *n == name) {
                Some(w) => w.1 = w.1.max(tv),
                None => worst.push((name, tv)),
            }
        }
    }
    worst
}

pub fn truncnorm_cdf(p: &TruncNormalParams, x: f64) -> f64 {
    let n = Normal::new(p.mean, p.variance.sqrt()).unwrap();
    if x <= p.lower {
        return 0.0;
    }
    if x >= p.upper {
        return 1.0;
    }
    if p.lower > p.mean {
        let (sl, su) = (
            n.sf(p.lower),
            if p.upper.is_finite() {
                n.sf(p.upper)
            } else {
                0.0
            },
        );
        (sl - n.sf(x)) / (sl - su)
    } else {
        let (cl, cu) = (
            if p.lower.is_finite() {
                n.cdf(p.lower)
            } else {
                0.0
            },
            if p.upper.is_finite() {
                n.cdf(p.upper)
            } else {
                1.0
            },
        );
        (n.cdf(x) - cl) / (cu - cl)
    }
}

pub fn invgamma_cdf(p: &InvGammaParams, x: f64) -> f64 {
    InverseGamma::new(p.shape, p.scale).unwrap().cdf(x)
}

/// Kolmogorov–Smirnov distance of `draws` against `cdf`.
pub fn ks_distance(mut draws: Vec<f64>, cdf: impl Fn(f64) -> f64) -> f64 {
    draws.sort_by(f64::total_cmp);
    let n = draws.len() as f64;
    draws
        .iter()
        .enumerate()
        .map(|(k, &x)| {
            let f = cdf(x);
            (f - k as f64 / n).abs().max(((k + 1) as f64 / n - f).abs())
        })
        .fold(0.0, f64::max)
}

/// KS distance for every closed-form conditional from `draws` repeated
/// single-site draws at one fixed random state.
pub fn ks_suite(seed: u64, draws: usize) -> Vec<(&'static str, f64)> {
    let case = random_case(seed);
    let (data, hyp, st) = (&case.data, &case.hyp, &case.state);
    let mut rng = RngStream::new(seed);
    let tn = |name: &'static str, p: TruncNormalParams, rng: &mut RngStream| {
        let xs: Vec<f64> = (0..draws)
            .map(|_| sample_truncated_normal(&p, rng).unwrap())
            .collect();
        (name, ks_distance(xs, |x| truncnorm_cdf(&p, x)))
    };
    let mut out = vec![
        tn(
            "alpha",
            alpha_conditional(st, data, hyp, 0).unwrap(),
            &mut rng,
        ),
        tn("beta", beta_conditional(st, data, 0).unwrap(), &mut rng),
        tn("mu_alpha", mu_alpha_conditional(st, hyp).unwrap(), &mut rng),
        tn("mu_beta", mu_beta_conditional(st, hyp).unwrap(), &mut rng),
        tn("z", z_conditional(st, data, 0).unwrap(), &mut rng),
    ];
    let ig = |name: &'static str, p: InvGammaParams, rng: &mut RngStream| {
        let xs: Vec<f64> = (0..draws)
            .map(|_| sample_inverse_gamma(&p, rng).unwrap())
            .collect();
        (name, ks_distance(xs, |x| invgamma_cdf(&p, x)))
    };
    out.push(ig(
        "sigma2",
        sigma2_conditional(st, data, hyp, 0).unwrap(),
        &mut rng,
    ));
    out.push(ig(
        "sigma_beta2",
        sigma_beta2_conditional(st, hyp).unwrap(),
        &mut rng,
    ));
    out.push(ig(
        "theta2",
        theta2_conditional(st, data, hyp, 0).unwrap(),
        &mut rng,
    ));
    out
}

/// Analytic mean and variance of a truncated normal.
pub fn truncnorm_moments(p: &TruncNormalParams) -> (f64, f64) {
    let sd = p.variance.sqrt();
    let std = Normal::new(0.0, 1.0).unwrap();
    let (a, b) = ((p.lower - p.mean) / sd, (p.upper - p.mean) / sd);
    let phi = |t: f64| {
        if t.is_finite() {
            (-0.5 * t * t).exp() / (2.0 * std::f64::consts::PI).sqrt()
        } else {
            0.0
        }
    };
    let tphi = |t: f64| if t.is_finite() { t * phi(t) } else { 0.0 };
    let z = if a > 0.0 {
        std.sf(a) - std.sf(b)
    } else {
        std.cdf(b) - std.cdf(a)
    };
    let r = (phi(a) - phi(b)) / z;
    (
        p.mean + sd * r,
        p.variance * (1.0 + (tphi(a) - tphi(b)) / z - r * r),
    )
}

pub struct MomentCheck {
    pub label: String,
    pub mean_z: f64,
    pub var_z: Option<f64>,
}

fn sample_moments(xs: &[f64], mean: f64, var: f64) -> (f64, f64) {
    let n = xs.len() as f64;
    let m = xs.iter().sum::<f64>() / n;
    let v = xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0);
    let m4 = xs.iter().map(|x| (x - mean).powi(4)).sum::<f64>() / n;
    let mean_z = (m - mean) / (var / n).sqrt();
    let var_z = (v - var) / ((m4 - var * var).max(f64::MIN_POSITIVE) / n).sqrt();
    (mean_z, var_z)
}

/// Standardized deviations of empirical moments from analytic values.
pub fn moment_suite(draws: usize, seed: u64) -> Vec<MomentCheck> {
    let mut rng = RngStream::new(seed);
    let mut out = Vec::new();
    let inf = f64::INFINITY;
    for (m, v, l, u) in [
        (0.0, 1.0, -1.0, 2.0),
        (0.0, 1.0, 3.0, inf),
        (5.0, 4.0, 0.0, inf),
        (-2.0, 1.0, 0.0, inf),
        (0.0, 1.0, 6.0, inf),
        (1.0, 0.25, 0.9, 1.1),
    ] {
        let p = TruncNormalParams::new(m, v, l, u).unwrap();
        let (mean, var) = truncnorm_moments(&p);
        let xs: Vec<f64> = (0..draws)
            .map(|_| sample_truncated_normal(&p, &mut rng).unwrap())
            .collect();
        let (mz, vz) = sample_moments(&xs, mean, var);
        out.push(MomentCheck {
            label: format!("truncnorm({m},{v},[{l},{u}])"),
            mean_z: mz,
            var_z: Some(vz),
        });
    }
    for (a, b) in [(3.0, 2.0), (6.0, 10.0), (12.0, 1.0)] {
        let p = InvGammaParams::new(a, b).unwrap();
        let mean = b / (a - 1.0);
        let var = b * b / ((a - 1.0).powi(2) * (a - 2.0));
        let xs: Vec<f64> = (0..draws)
            .map(|_| sample_inverse_gamma(&p, &mut rng).unwrap())
            .collect();
        let (mz, vz) = sample_moments(&xs, mean, var);
        // the fourth moment, needed for the variance's standard error, exists only for shape > 4
        out.push(MomentCheck {
            label: format!("invgamma({a},{b})"),
            mean_z: mz,
            var_z: (a > 4.0).then_some(vz),
        });
    }
    out
}
