//! Synthetic intervention/biomarker-only data with known ground truth.
//!
//! Biomarkers follow `y_ip ~ 𝒩_[0,∞)(α_p + β_p z_i, σ_p²)` (or `β_p z_i²` in
//! the misspecified study) with latent intakes drawn from a truncated
//! Gaussian mixture around food quantities X_d.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::Dataset;
use crate::stats::{
    sample_inverse_gamma, sample_truncated_normal, InvGammaParams, RngStream, TruncNormalParams,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BiomarkerRange {
    Small,
    Medium,
    Large,
}

impl BiomarkerRange {
    /// `(μ_α, μ_β, σ_α², σ_β²)` used to draw α and β.
    pub fn hyper(self) -> (f64, f64, f64, f64) {
        match self {
            BiomarkerRange::Small => (1.0, 0.01, 1.0, 0.01),
            BiomarkerRange::Medium => (20.0, 0.1, 4.0, 0.1),
            BiomarkerRange::Large => (100.0, 1.0, 14.0, 1.0),
        }
    }

    /// Expected σ_p² for the small- and large-variance settings.
    pub fn noise_levels(self) -> (f64, f64) {
        match self {
            BiomarkerRange::Small => (1.0, 9.0),
            BiomarkerRange::Medium => (9.0, 400.0),
            BiomarkerRange::Large => (225.0, 10_000.0),
        }
    }
}

/// Biomarker-noise scenario: all small (S1), alternating small/large (S2), all large (S3).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum VarianceScenario {
    S1,
    S2,
    S3,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Increments {
    Stable,
    Increasing,
    Decreasing,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ThetaSetting {
    Low,
    High,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Study {
    I,
    II,
    III,
    #[serde(rename = "varyingX")]
    VaryingX,
    #[serde(rename = "uniform")]
    Uniform,
    #[serde(rename = "unbalanced")]
    Unbalanced,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ScenarioConfig {
    pub n: usize,
    pub d: usize,
    pub p: usize,
    pub biomarker_range: BiomarkerRange,
    pub variance_scenario: VarianceScenario,
    pub increments: Increments,
    pub theta_setting: ThetaSetting,
    pub study: Study,
    /// Number of test food quantities in the varying-X study.
    pub d_star: Option<usize>,
    /// Inverse-gamma shape used for σ_p² (scale set to match the expected value).
    pub sigma_shape: f64,
    /// Inverse-gamma shape used for θ_d².
    pub theta_shape: f64,
    pub seed: u64,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        ScenarioConfig {
            n: 99,
            d: 3,
            p: 4,
            biomarker_range: BiomarkerRange::Medium,
            variance_scenario: VarianceScenario::S1,
            increments: Increments::Stable,
            theta_setting: ThetaSetting::Low,
            study: Study::I,
            d_star: None,
            sigma_shape: 3.0,
            theta_shape: 10.0,
            seed: 0,
        }
    }
}

impl ScenarioConfig {
    pub fn n_test(&self) -> usize {
        self.n * 2 / 5
    }

    pub fn validate(&self) -> Result<()> {
        if self.n < self.d || self.n_test() == 0 {
            return Err(Error::Parameter(format!(
                "sample size {} too small for {} components",
                self.n, self.d
            )));
        }
        if self.d < 2 || self.p == 0 {
            return Err(Error::Parameter(
                "need D >= 2 and at least one biomarker".into(),
            ));
        }
        if !(self.sigma_shape > 1.0 && self.theta_shape > 1.0) {
            return Err(Error::Parameter(
                "inverse-gamma shapes must exceed 1 for a finite mean".into(),
            ));
        }
        if let Some(ds) = self.d_star {
            if ds < 1 || ds + 1 < self.d || ds > self.d + 1 {
                return Err(Error::Parameter(format!(
                    "D* must be D-1, D or D+1, got {ds}"
                )));
            }
            if self.study != Study::VaryingX {
                return Err(Error::Parameter(
                    "D* only applies to the varying-X study".into(),
                ));
            }
        }
        Ok(())
    }

    /// Expected θ_d² for (training, test) data.
    pub fn theta2_expected(&self) -> (f64, f64) {
        match (self.study, self.theta_setting) {
            (Study::II, ThetaSetting::Low) => (36.0, 144.0),
            (Study::II, ThetaSetting::High) => (144.0, 576.0),
            (_, ThetaSetting::Low) => (64.0, 64.0),
            (_, ThetaSetting::High) => (256.0, 256.0),
        }
    }
}

/// Generating values for one dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Truth {
    pub alpha: Vec<f64>,
    pub beta: Vec<f64>,
    pub sigma2: Vec<f64>,
    /// Training food quantities.
    pub levels: Vec<f64>,
    pub theta2: Vec<f64>,
    pub train_z: Vec<f64>,
    /// Zero-based training allocations.
    pub train_c: Vec<usize>,
    /// Food quantities the test intakes were drawn around (differs from
    /// `levels` only in the varying-X study; empty for uniform intakes).
    pub test_levels: Vec<f64>,
    pub test_theta2: Vec<f64>,
    pub test_z: Vec<f64>,
    pub test_c: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimulatedPair {
    pub train: Dataset,
    pub test: Dataset,
    pub truth: Truth,
    pub config: ScenarioConfig,
}

const X_MIN: f64 = 30.0;
const X_MAX: f64 = 320.0;
const X_SD: f64 = 10.0;

/// Means μ_X spread over `[30, 320]` with the requested gap pattern.
pub fn quantity_means(d: usize, inc: Increments) -> Vec<f64> {
    if d == 1 {
        return vec![(X_MIN + X_MAX) / 2.0];
    }
    let weights: Vec<f64> = match inc {
        Increments::Stable => vec![1.0; d - 1],
        Increments::Increasing => (1..d).map(|k| k as f64).collect(),
        Increments::Decreasing => (1..d).rev().map(|k| k as f64).collect(),
    };
    let total: f64 = weights.iter().sum();
    let mut out = vec![X_MIN];
    let mut acc = X_MIN;
    for w in &weights {
        acc += (X_MAX - X_MIN) * w / total;
        out.push(acc);
    }
    *out.last_mut().unwrap() = X_MAX;
    out
}

fn draw_levels(d: usize, inc: Increments, avoid: &[f64], rng: &mut RngStream) -> Result<Vec<f64>> {
    let means = quantity_means(d, inc);
    // retry until strictly increasing, inside the band and distinct from `avoid`
    for _ in 0..10_000 {
        let mut x = Vec::with_capacity(d);
        for &m in &means {
            x.push(sample_truncated_normal(
                &TruncNormalParams::new(m, X_SD * X_SD, 0.0, f64::INFINITY)?,
                rng,
            )?);
        }
        let ordered = x.windows(2).all(|w| w[0] < w[1]);
        let fresh = x.iter().all(|v| !avoid.contains(v));
        let banded = avoid.is_empty() || x.iter().all(|v| (X_MIN..=X_MAX).contains(v));
        if ordered && fresh && banded {
            return Ok(x);
        }
    }
    Err(Error::Parameter(
        "could not draw ordered food quantities".into(),
    ))
}

fn draw_theta2(d: usize, expected: f64, shape: f64, rng: &mut RngStream) -> Result<Vec<f64>> {
    let ig = InvGammaParams::new(shape, expected * (shape - 1.0))?;
    (0..d).map(|_| sample_inverse_gamma(&ig, rng)).collect()
}

/// Allocations drawn uniformly from `0..d`, redrawn until every class appears.
fn balanced_allocations(n: usize, d: usize, rng: &mut RngStream) -> Vec<usize> {
    loop {
        let c: Vec<usize> = (0..n)
            .map(|_| ((rng.uniform() * d as f64) as usize).min(d - 1))
            .collect();
        if (0..d).all(|k| c.contains(&k)) || n < d {
            return c;
        }
    }
}

/// One dominant component holding between 70% and 80% of the observations.
fn unbalanced_allocations(n: usize, d: usize, rng: &mut RngStream) -> Vec<usize> {
    let dom = ((rng.uniform() * d as f64) as usize).min(d - 1);
    let lo = (0.7 * n as f64).ceil() as usize;
    let hi = ((0.8 * n as f64).floor() as usize).max(lo);
    let n_dom = lo + ((rng.uniform() * (hi - lo + 1) as f64) as usize).min(hi - lo);
    let rest = n - n_dom;
    let others: Vec<usize> = (0..d).filter(|&k| k != dom).collect();
    let u: Vec<f64> = others.iter().map(|_| rng.uniform() * rest as f64).collect();
    let total: f64 = u.iter().sum();
    let mut sizes: Vec<usize> = u
        .iter()
        .map(|v| (rest as f64 * v / total).floor() as usize)
        .collect();
    let assigned: usize = sizes.iter().sum();
    sizes[0] += rest - assigned;
    let mut c = vec![dom; n_dom];
    for (k, s) in others.iter().zip(&sizes) {
        c.extend(std::iter::repeat(*k).take(*s));
    }
    c
}

fn draw_intakes(
    c: &[usize],
    levels: &[f64],
    theta2: &[f64],
    rng: &mut RngStream,
) -> Result<Vec<f64>> {
    c.iter()
        .map(|&k| {
            sample_truncated_normal(&TruncNormalParams::nonnegative(levels[k], theta2[k])?, rng)
        })
        .collect()
}

fn draw_biomarkers(
    z: &[f64],
    alpha: &[f64],
    beta: &[f64],
    sigma2: &[f64],
    quadratic: bool,
    rng: &mut RngStream,
) -> Result<Vec<Vec<f64>>> {
    z.iter()
        .map(|&zi| {
            let signal = if quadratic { zi * zi } else { zi };
            (0..alpha.len())
                .map(|p| {
                    let tn =
                        TruncNormalParams::nonnegative(alpha[p] + beta[p] * signal, sigma2[p])?;
                    sample_truncated_normal(&tn, rng)
                })
                .collect()
        })
        .collect()
}

/// Generate a train/test pair for any study.
pub fn generate_scenario(cfg: &ScenarioConfig) -> Result<SimulatedPair> {
    cfg.validate()?;
    let mut rng = RngStream::new(cfg.seed);
    let (mu_a, mu_b, s2_a, s2_b) = cfg.biomarker_range.hyper();
    let mut alpha = Vec::with_capacity(cfg.p);
    let mut beta = Vec::with_capacity(cfg.p);
    for _ in 0..cfg.p {
        alpha.push(sample_truncated_normal(
            &TruncNormalParams::nonnegative(mu_a, s2_a)?,
            &mut rng,
        )?);
        beta.push(
            sample_truncated_normal(&TruncNormalParams::nonnegative(mu_b, s2_b)?, &mut rng)?
                .max(f64::MIN_POSITIVE),
        );
    }
    let (small, large) = cfg.biomarker_range.noise_levels();
    let mut sigma2 = Vec::with_capacity(cfg.p);
    for p in 0..cfg.p {
        let expected = match cfg.variance_scenario {
            VarianceScenario::S1 => small,
            VarianceScenario::S3 => large,
            VarianceScenario::S2 => {
                if p % 2 == 0 {
                    small
                } else {
                    large
                }
            }
        };
        let ig = InvGammaParams::new(cfg.sigma_shape, expected * (cfg.sigma_shape - 1.0))?;
        sigma2.push(sample_inverse_gamma(&ig, &mut rng)?);
    }
    let levels = draw_levels(cfg.d, cfg.increments, &[], &mut rng)?;
    let (e_train, e_test) = cfg.theta2_expected();
    let theta2 = draw_theta2(cfg.d, e_train, cfg.theta_shape, &mut rng)?;
    let quadratic = cfg.study == Study::III;
    if quadratic {
        for b in &mut beta {
            *b *= 1e-3;
        }
    }

    let train_c = balanced_allocations(cfg.n, cfg.d, &mut rng);
    let train_z = draw_intakes(&train_c, &levels, &theta2, &mut rng)?;
    let train_rows = draw_biomarkers(&train_z, &alpha, &beta, &sigma2, quadratic, &mut rng)?;

    let n_test = cfg.n_test();
    let (test_levels, test_theta2, test_c, test_z) = match cfg.study {
        Study::I | Study::III => {
            let c = balanced_allocations(n_test, cfg.d, &mut rng);
            let z = draw_intakes(&c, &levels, &theta2, &mut rng)?;
            (levels.clone(), theta2.clone(), c, z)
        }
        Study::II => {
            let t2 = draw_theta2(cfg.d, e_test, cfg.theta_shape, &mut rng)?;
            let c = balanced_allocations(n_test, cfg.d, &mut rng);
            let z = draw_intakes(&c, &levels, &t2, &mut rng)?;
            (levels.clone(), t2, c, z)
        }
        Study::VaryingX => {
            let ds = cfg.d_star.unwrap_or(cfg.d);
            let xs = draw_levels(ds, cfg.increments, &levels, &mut rng)?;
            let t2 = draw_theta2(ds, e_test, cfg.theta_shape, &mut rng)?;
            let c = balanced_allocations(n_test, ds, &mut rng);
            let z = draw_intakes(&c, &xs, &t2, &mut rng)?;
            (xs, t2, c, z)
        }
        Study::Uniform => {
            let z: Vec<f64> = (0..n_test).map(|_| 350.0 * rng.uniform()).collect();
            (Vec::new(), Vec::new(), Vec::new(), z)
        }
        Study::Unbalanced => {
            let c = unbalanced_allocations(n_test, cfg.d, &mut rng);
            let z = draw_intakes(&c, &levels, &theta2, &mut rng)?;
            (levels.clone(), theta2.clone(), c, z)
        }
    };
    let test_rows = draw_biomarkers(&test_z, &alpha, &beta, &sigma2, quadratic, &mut rng)?;

    let doses: Vec<f64> = train_c.iter().map(|&k| levels[k]).collect();
    let train = Dataset::from_rows(&train_rows, Some(doses), levels.clone())?;
    let test = Dataset::from_rows(&test_rows, None, levels.clone())?;
    let truth = Truth {
        alpha,
        beta,
        sigma2,
        levels,
        theta2,
        train_z,
        train_c,
        test_levels,
        test_theta2,
        test_z,
        test_c,
    };
    Ok(SimulatedPair {
        train,
        test,
        truth,
        config: cfg.clone(),
    })
}

/// Quadratic-mean study: `y = α + 0.001 β z² + ε`.
pub fn generate_misspecified(cfg: &ScenarioConfig) -> Result<SimulatedPair> {
    if cfg.study != Study::III {
        return Err(Error::Usage(
            "misspecified generator needs study III".into(),
        ));
    }
    generate_scenario(cfg)
}

/// Test-side variants: varying X, uniform intakes or unbalanced components.
pub fn generate_variant_test(cfg: &ScenarioConfig) -> Result<SimulatedPair> {
    if !matches!(
        cfg.study,
        Study::VaryingX | Study::Uniform | Study::Unbalanced
    ) {
        return Err(Error::Usage(
            "variant generator needs the varyingX, uniform or unbalanced study".into(),
        ));
    }
    generate_scenario(cfg)
}

/// Synthetic stand-in for the four-biomarker apple intervention data:
/// 86 observations over doses of 50, 100 and 300 g, with slopes and noise on
/// the scale of the published posterior medians.
#[derive(Debug, Clone)]
pub struct AppleLike {
    pub data: Dataset,
    pub z: Vec<f64>,
    pub alpha: Vec<f64>,
    pub beta: Vec<f64>,
    pub sigma2: Vec<f64>,
    pub theta2: Vec<f64>,
}

pub const APPLE_LEVELS: [f64; 3] = [50.0, 100.0, 300.0];
pub const APPLE_N: usize = 86;

impl AppleLike {
    /// Per-dose spread of the intake implied by the biomarkers: component
    /// spread combined with the biomarker-only intake uncertainty.
    pub fn noise_scale(&self) -> Vec<f64> {
        let info: f64 = self
            .beta
            .iter()
            .zip(&self.sigma2)
            .map(|(b, s)| b * b / s)
            .sum();
        self.theta2
            .iter()
            .map(|t| (t + 1.0 / info).sqrt())
            .collect()
    }
}

pub fn generate_apple_like(seed: u64) -> Result<AppleLike> {
    let mut rng = RngStream::new(seed);
    let alpha0 = [0.21, 0.49, 0.61, 0.61];
    let beta0 = [0.003, 0.005, 0.007, 0.008];
    let sigma0 = [0.35, 0.27, 0.68, 0.38];
    let jitter =
        |v: f64, rng: &mut RngStream| v * (1.0 + 0.1 * rng.standard_normal()).clamp(0.7, 1.3);
    let alpha: Vec<f64> = alpha0.iter().map(|&a| jitter(a, &mut rng)).collect();
    let beta: Vec<f64> = beta0.iter().map(|&b| jitter(b, &mut rng)).collect();
    let sigma2: Vec<f64> = sigma0
        .iter()
        .map(|&s| jitter(s, &mut rng).powi(2))
        .collect();
    let theta2 = vec![8.0f64.powi(2), 12.0f64.powi(2), 25.0f64.powi(2)];
    // 29/29/28, shuffled
    let mut c: Vec<usize> = (0..APPLE_N).map(|i| i % 3).collect();
    for i in (1..c.len()).rev() {
        let j = ((rng.uniform() * (i + 1) as f64) as usize).min(i);
        c.swap(i, j);
    }
    let z = draw_intakes(&c, &APPLE_LEVELS, &theta2, &mut rng)?;
    let rows = draw_biomarkers(&z, &alpha, &beta, &sigma2, false, &mut rng)?;
    let doses = c.iter().map(|&k| APPLE_LEVELS[k]).collect();
    let data = Dataset::from_rows(&rows, Some(doses), APPLE_LEVELS.to_vec())?;
    Ok(AppleLike {
        data,
        z,
        alpha,
        beta,
        sigma2,
        theta2,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn equispaced_and_patterned_means() {
        let m = quantity_means(3, Increments::Stable);
        assert!(((m[1] - m[0]) - (m[2] - m[1])).abs() < 1e-12);
        assert_eq!((m[0], m[2]), (30.0, 320.0));
        let m = quantity_means(4, Increments::Increasing);
        assert!(m[1] - m[0] < m[2] - m[1] && m[2] - m[1] < m[3] - m[2]);
        let m = quantity_means(4, Increments::Decreasing);
        assert!(m[1] - m[0] > m[2] - m[1] && m[2] - m[1] > m[3] - m[2]);
    }

    #[test]
    fn test_size_is_forty_percent() {
        for (n, want) in [(30, 12), (60, 24), (99, 39), (150, 60)] {
            let cfg = ScenarioConfig {
                n,
                ..Default::default()
            };
            assert_eq!(cfg.n_test(), want);
            let s = generate_scenario(&cfg).unwrap();
            assert_eq!((s.train.n(), s.test.n()), (n, want));
        }
    }

    #[test]
    fn reproducible_given_seed() {
        let cfg = ScenarioConfig {
            seed: 5,
            study: Study::II,
            ..Default::default()
        };
        assert_eq!(
            generate_scenario(&cfg).unwrap(),
            generate_scenario(&cfg).unwrap()
        );
        let other = generate_scenario(&ScenarioConfig { seed: 6, ..cfg }).unwrap();
        assert_ne!(
            other.truth.train_z,
            generate_scenario(&cfg).unwrap().truth.train_z
        );
    }

    #[test]
    fn misspecified_mean_function() {
        let cfg = ScenarioConfig {
            seed: 3,
            study: Study::III,
            ..Default::default()
        };
        let s = generate_misspecified(&cfg).unwrap();
        let base = generate_scenario(&ScenarioConfig {
            study: Study::I,
            ..cfg.clone()
        })
        .unwrap();
        for (b3, b1) in s.truth.beta.iter().zip(&base.truth.beta) {
            assert!((b3 - 1e-3 * b1).abs() < 1e-18);
        }
        assert!(generate_misspecified(&ScenarioConfig::default()).is_err());
    }

    #[test]
    fn unbalanced_dominant_share() {
        for seed in 0..50 {
            let cfg = ScenarioConfig {
                n: 100,
                study: Study::Unbalanced,
                seed,
                ..Default::default()
            };
            let s = generate_variant_test(&cfg).unwrap();
            let mut counts = vec![0; 3];
            for &c in &s.truth.test_c {
                counts[c] += 1;
            }
            assert_eq!(counts.iter().sum::<usize>(), 40);
            let top = *counts.iter().max().unwrap();
            assert!((28..=32).contains(&top), "{counts:?}");
        }
    }

    #[test]
    fn varying_levels_are_fresh_and_banded() {
        for seed in 0..20 {
            let cfg = ScenarioConfig {
                study: Study::VaryingX,
                d_star: Some(4),
                seed,
                ..Default::default()
            };
            let s = generate_variant_test(&cfg).unwrap();
            assert_eq!(s.truth.test_levels.len(), 4);
            assert!(s
                .truth
                .test_levels
                .iter()
                .all(|x| (30.0..=320.0).contains(x)));
            assert!(s
                .truth
                .test_levels
                .iter()
                .all(|x| !s.truth.levels.contains(x)));
            assert!(s.truth.test_c.iter().all(|&c| c < 4));
        }
        let bad = ScenarioConfig {
            study: Study::VaryingX,
            d_star: Some(5),
            ..Default::default()
        };
        assert!(generate_scenario(&bad).is_err());
    }

    #[test]
    fn all_components_present_in_training() {
        for seed in 0..30 {
            let s = generate_scenario(&ScenarioConfig {
                n: 30,
                seed,
                ..Default::default()
            })
            .unwrap();
            for k in 0..3 {
                assert!(s.truth.train_c.contains(&k));
            }
        }
    }

    #[test]
    fn apple_like_shape() {
        let a = generate_apple_like(3).unwrap();
        assert_eq!((a.data.n(), a.data.p(), a.data.d()), (86, 4, 3));
        let counts: Vec<usize> = (0..3)
            .map(|k| a.data.labels().unwrap().iter().filter(|&&c| c == k).count())
            .collect();
        assert_eq!(counts, vec![29, 29, 28]);
        let b = generate_apple_like(3).unwrap();
        assert_eq!(a.data.y(), b.data.y());
        let ns = a.noise_scale();
        assert!(ns.iter().all(|v| *v > 10.0 && *v < 80.0), "{ns:?}");
    }
}
