//! Comparator regressions of dose on biomarkers: conjugate Bayesian linear
//! regression and PLS1 via NIPALS.

use log::warn;
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::error::{Error, Result};
use crate::model::Dataset;
use crate::stats::{quantile_sorted, sorted_copy};

/// Point prediction with a central 95% interval.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IntervalPrediction {
    pub median: f64,
    pub ci95: (f64, f64),
}

fn require_doses(data: &Dataset) -> Result<&[f64]> {
    data.doses()
        .ok_or_else(|| Error::Usage("baseline regressions need a dose column".into()))
}

fn check_width(y: &DMatrix<f64>, p: usize) -> Result<()> {
    if y.ncols() != p {
        return Err(Error::Dimension {
            what: "biomarker columns",
            expected: p,
            found: y.ncols(),
        });
    }
    Ok(())
}

/// Normal–inverse-gamma prior: coefficients ~ N(0, σ² · scale · I), σ² ~ InvΓ(a, b).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BlrPrior {
    pub scale: f64,
    pub noise_shape: f64,
    pub noise_scale: f64,
}

impl Default for BlrPrior {
    fn default() -> Self {
        Self {
            scale: 1e4,
            noise_shape: 1.0,
            noise_scale: 1.0,
        }
    }
}

/// Posterior over (intercept, slopes, noise variance). Coefficient order is
/// intercept first.
#[derive(Debug, Clone, PartialEq)]
pub struct BlrModel {
    pub prior: BlrPrior,
    pub mean: DVector<f64>,
    /// Posterior scale matrix V_n; the coefficient covariance is σ² V_n.
    pub cov: DMatrix<f64>,
    pub shape: f64,
    pub rate: f64,
}

fn design(y: &DMatrix<f64>) -> DMatrix<f64> {
    let (n, p) = y.shape();
    DMatrix::from_fn(n, p + 1, |i, j| if j == 0 { 1.0 } else { y[(i, j - 1)] })
}

pub fn fit_blr(data: &Dataset, prior_scale: f64) -> Result<BlrModel> {
    fit_blr_with(
        data,
        &BlrPrior {
            scale: prior_scale,
            ..BlrPrior::default()
        },
    )
}

pub fn fit_blr_with(data: &Dataset, prior: &BlrPrior) -> Result<BlrModel> {
    for (name, v) in [
        ("prior_scale", prior.scale),
        ("noise_shape", prior.noise_shape),
        ("noise_scale", prior.noise_scale),
    ] {
        if !(v > 0.0) || !v.is_finite() {
            return Err(Error::Parameter(format!(
                "{name} must be positive and finite, got {v}"
            )));
        }
    }
    let t = DVector::from_column_slice(require_doses(data)?);
    let x = design(data.y());
    let (n, k) = x.shape();
    if n <= k {
        warn!("BLR with {n} observations and {k} coefficients; posterior is proper only through the prior");
    }
    let precision = x.transpose() * &x + DMatrix::identity(k, k) / prior.scale;
    let chol = precision
        .clone()
        .cholesky()
        .ok_or_else(|| Error::Rank("BLR posterior precision is not positive definite".into()))?;
    let xt_t = x.transpose() * &t;
    let mean = chol.solve(&xt_t);
    let cov = chol.inverse();
    let shape = prior.noise_shape + n as f64 / 2.0;
    let quad = t.dot(&t) - mean.dot(&(&precision * &mean));
    let rate = prior.noise_scale + 0.5 * quad.max(0.0);
    Ok(BlrModel {
        prior: *prior,
        mean,
        cov: symmetrize(cov),
        shape,
        rate,
    })
}

fn symmetrize(m: DMatrix<f64>) -> DMatrix<f64> {
    (&m + m.transpose()) * 0.5
}

impl BlrModel {
    pub fn p(&self) -> usize {
        self.mean.len() - 1
    }

    /// Location and scale of the Student-t predictive at one biomarker row.
    pub fn predictive_t(&self, row: &[f64]) -> (f64, f64) {
        let mut x = DVector::zeros(self.mean.len());
        x[0] = 1.0;
        for (j, &v) in row.iter().enumerate() {
            x[j + 1] = v;
        }
        let loc = x.dot(&self.mean);
        let lev = x.dot(&(&self.cov * &x));
        (loc, (self.rate / self.shape * (1.0 + lev)).sqrt())
    }

    pub fn dof(&self) -> f64 {
        2.0 * self.shape
    }
}

pub fn predict_blr(model: &BlrModel, y_star: &DMatrix<f64>) -> Result<Vec<IntervalPrediction>> {
    check_width(y_star, model.p())?;
    let t = StudentsT::new(0.0, 1.0, model.dof())
        .map_err(|e| Error::Parameter(format!("Student-t predictive: {e}")))?;
    let q = t.inverse_cdf(0.975);
    Ok((0..y_star.nrows())
        .map(|i| {
            let row: Vec<f64> = y_star.row(i).iter().copied().collect();
            let (loc, scale) = model.predictive_t(&row);
            IntervalPrediction {
                median: loc,
                ci95: (loc - q * scale, loc + q * scale),
            }
        })
        .collect())
}

/// PLS1 regression fitted by NIPALS on standardized biomarkers.
#[derive(Debug, Clone, PartialEq)]
pub struct PlsModel {
    /// Components actually extracted; fewer than requested when the residual
    /// carries no further covariance with the response.
    pub n_components: usize,
    pub x_mean: Vec<f64>,
    pub x_scale: Vec<f64>,
    pub y_mean: f64,
    pub weights: DMatrix<f64>,
    pub loadings: DMatrix<f64>,
    pub scores: DMatrix<f64>,
    pub y_loadings: Vec<f64>,
    /// Regression coefficients on the standardized biomarkers.
    pub coef: DVector<f64>,
}

pub const DEFAULT_PLS_COMPONENTS: usize = 2;
pub const PLS_FOLDS: usize = 10;

pub fn fit_pls(data: &Dataset, n_components: usize) -> Result<PlsModel> {
    let t = require_doses(data)?;
    pls_nipals(data.y(), t, n_components)
}

fn pls_nipals(y: &DMatrix<f64>, t: &[f64], n_components: usize) -> Result<PlsModel> {
    let (n, p) = y.shape();
    if n_components == 0 || n_components > p {
        return Err(Error::Parameter(format!(
            "PLS needs 1..={p} components, got {n_components}"
        )));
    }
    if n < 2 {
        return Err(Error::Rank("PLS needs at least two observations".into()));
    }
    let mut x_mean = vec![0.0; p];
    let mut x_scale = vec![1.0; p];
    let mut x = y.clone();
    for j in 0..p {
        let col: Vec<f64> = y.column(j).iter().copied().collect();
        let m = col.iter().sum::<f64>() / n as f64;
        let var = col.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (n - 1) as f64;
        x_mean[j] = m;
        if var > 0.0 {
            x_scale[j] = var.sqrt();
        }
        for i in 0..n {
            x[(i, j)] = (y[(i, j)] - m) / x_scale[j];
        }
    }
    let y_mean = t.iter().sum::<f64>() / n as f64;
    let mut r = DVector::from_iterator(n, t.iter().map(|v| v - y_mean));

    let scale0 = x.norm().max(1.0);
    let mut ws = Vec::new();
    let mut ps = Vec::new();
    let mut ts = Vec::new();
    let mut qs = Vec::new();
    for _ in 0..n_components {
        let xr = x.transpose() * &r;
        let norm = xr.norm();
        if norm <= 1e-12 * scale0 * r.norm().max(1.0) {
            break;
        }
        let w = xr / norm;
        let score = &x * &w;
        let tt = score.dot(&score);
        if tt <= 0.0 {
            break;
        }
        let load = x.transpose() * &score / tt;
        let q = r.dot(&score) / tt;
        x -= &score * load.transpose();
        r -= &score * q;
        ws.push(w);
        ps.push(load);
        ts.push(score);
        qs.push(q);
    }
    let a = ws.len();
    if a == 0 {
        return Err(Error::DegenerateInformation);
    }
    let weights = DMatrix::from_columns(&ws);
    let loadings = DMatrix::from_columns(&ps);
    let scores = DMatrix::from_columns(&ts);
    let pw = loadings.transpose() * &weights;
    let inv = pw
        .try_inverse()
        .ok_or_else(|| Error::Rank("PLS loading-weight product is singular".into()))?;
    let coef = &weights * inv * DVector::from_column_slice(&qs);
    Ok(PlsModel {
        n_components: a,
        x_mean,
        x_scale,
        y_mean,
        weights,
        loadings,
        scores,
        y_loadings: qs,
        coef,
    })
}

impl PlsModel {
    pub fn p(&self) -> usize {
        self.x_mean.len()
    }

    pub fn predict_row(&self, row: &[f64]) -> f64 {
        self.y_mean
            + row
                .iter()
                .enumerate()
                .map(|(j, v)| (v - self.x_mean[j]) / self.x_scale[j] * self.coef[j])
                .sum::<f64>()
    }

    pub fn predict_point(&self, y_star: &DMatrix<f64>) -> Result<Vec<f64>> {
        check_width(y_star, self.p())?;
        Ok((0..y_star.nrows())
            .map(|i| self.predict_row(&y_star.row(i).iter().copied().collect::<Vec<_>>()))
            .collect())
    }
}

/// Full-data PLS prediction as the point estimate; the interval is the
/// 2.5–97.5% spread of predictions from models refitted with each fold held
/// out. Folds are assigned by index modulo the fold count.
pub fn predict_pls(
    data: &Dataset,
    n_components: usize,
    y_star: &DMatrix<f64>,
) -> Result<Vec<IntervalPrediction>> {
    let full = fit_pls(data, n_components)?;
    let point = full.predict_point(y_star)?;
    let n = data.n();
    let folds = PLS_FOLDS.min(n);
    let mut per_fold = Vec::with_capacity(folds);
    for k in 0..folds {
        let keep: Vec<usize> = (0..n).filter(|i| i % folds != k).collect();
        let sub = data.select(&keep);
        let m = match fit_pls(&sub, n_components) {
            Ok(m) => m,
            Err(Error::DegenerateInformation) => continue,
            Err(e) => return Err(e),
        };
        per_fold.push(m.predict_point(y_star)?);
    }
    Ok(point
        .iter()
        .enumerate()
        .map(|(i, &med)| {
            if per_fold.is_empty() {
                return IntervalPrediction {
                    median: med,
                    ci95: (med, med),
                };
            }
            let s = sorted_copy(&per_fold.iter().map(|f| f[i]).collect::<Vec<_>>());
            IntervalPrediction {
                median: med,
                ci95: (
                    quantile_sorted(&s, 0.025).min(med),
                    quantile_sorted(&s, 0.975).max(med),
                ),
            }
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stats::RngStream;

    fn noisy(n: usize, p: usize, seed: u64) -> Dataset {
        let mut rng = RngStream::new(seed);
        let levels = vec![50.0, 100.0, 300.0];
        let doses: Vec<f64> = (0..n).map(|i| levels[i % 3]).collect();
        let rows: Vec<Vec<f64>> = doses
            .iter()
            .map(|&x| {
                (0..p)
                    .map(|j| {
                        (1.0 + j as f64 + 0.05 * (j + 1) as f64 * x + 3.0 * rng.standard_normal())
                            .abs()
                    })
                    .collect()
            })
            .collect();
        Dataset::from_rows(&rows, Some(doses), levels).unwrap()
    }

    #[test]
    fn blr_recovers_noiseless_line() {
        let levels = vec![2.0, 5.0, 8.0, 11.0];
        let doses: Vec<f64> = (0..20).map(|i| levels[i % 4]).collect();
        let rows: Vec<Vec<f64>> = doses.iter().map(|&x| vec![(x - 2.0) / 3.0]).collect();
        let data = Dataset::from_rows(&rows, Some(doses), levels).unwrap();
        let m = fit_blr(&data, 1e6).unwrap();
        assert!((m.mean[0] - 2.0).abs() < 1e-3, "{}", m.mean);
        assert!((m.mean[1] - 3.0).abs() < 1e-3);
    }

    #[test]
    fn blr_mean_matches_ridge_normal_equations() {
        let data = noisy(30, 3, 4);
        let lambda = 0.37;
        let m = fit_blr(&data, 1.0 / lambda).unwrap();
        // Ridge via an augmented least-squares system solved by QR.
        let x = design(data.y());
        let k = x.ncols();
        let mut aug = DMatrix::zeros(x.nrows() + k, k);
        aug.view_mut((0, 0), x.shape()).copy_from(&x);
        for j in 0..k {
            aug[(x.nrows() + j, j)] = lambda.sqrt();
        }
        let mut rhs = DVector::zeros(x.nrows() + k);
        for (i, &d) in data.doses().unwrap().iter().enumerate() {
            rhs[i] = d;
        }
        let qr = aug.qr();
        let ridge = qr
            .r()
            .solve_upper_triangular(&(qr.q().transpose() * rhs))
            .unwrap();
        for j in 0..k {
            assert!(
                (ridge[j] - m.mean[j]).abs() < 1e-8 * (1.0 + ridge[j].abs()),
                "{j}: {} vs {}",
                ridge[j],
                m.mean[j]
            );
        }
    }

    #[test]
    fn blr_shrinks_to_zero_under_tight_prior() {
        let data = noisy(30, 2, 1);
        let m = fit_blr(&data, 1e-12).unwrap();
        assert!(m.mean.amax() < 1e-6);
    }

    #[test]
    fn blr_centroid_prediction_is_dose_mean() {
        let data = noisy(60, 3, 2);
        let m = fit_blr(&data, 1e8).unwrap();
        let centroid = DMatrix::from_fn(1, 3, |_, j| data.y().column(j).mean());
        let pred = predict_blr(&m, &centroid).unwrap();
        let mean_dose = data.doses().unwrap().iter().sum::<f64>() / 60.0;
        assert!(
            (pred[0].median - mean_dose).abs() < 1e-4,
            "{} vs {mean_dose}",
            pred[0].median
        );
    }

    #[test]
    fn blr_interval_widens_with_leverage() {
        let data = noisy(40, 2, 3);
        let m = fit_blr(&data, 1e4).unwrap();
        let c: Vec<f64> = (0..2).map(|j| data.y().column(j).mean()).collect();
        let probes = DMatrix::from_fn(5, 2, |i, j| c[j] + 5.0 * i as f64 * (j as f64 + 1.0));
        let pred = predict_blr(&m, &probes).unwrap();
        let widths: Vec<f64> = pred.iter().map(|p| p.ci95.1 - p.ci95.0).collect();
        assert!(widths.windows(2).all(|w| w[1] > w[0]), "{widths:?}");
    }

    #[test]
    fn blr_interval_collapses_without_noise() {
        let levels = vec![1.0, 2.0];
        let doses: Vec<f64> = (0..400).map(|i| levels[i % 2]).collect();
        let rows: Vec<Vec<f64>> = doses.iter().map(|&x| vec![x]).collect();
        let data = Dataset::from_rows(&rows, Some(doses), levels).unwrap();
        let prior = BlrPrior {
            scale: 1e8,
            noise_shape: 1.0,
            noise_scale: 1e-12,
        };
        let m = fit_blr_with(&data, &prior).unwrap();
        let pred = predict_blr(&m, &DMatrix::from_row_slice(1, 1, &[1.5])).unwrap();
        assert!(pred[0].ci95.1 - pred[0].ci95.0 < 1e-4);
        assert!((pred[0].median - 1.5).abs() < 1e-6);
    }

    #[test]
    fn blr_rejects_wrong_width() {
        let m = fit_blr(&noisy(20, 2, 0), 1e4).unwrap();
        assert!(matches!(
            predict_blr(&m, &DMatrix::zeros(1, 3)),
            Err(Error::Dimension { .. })
        ));
    }

    fn ols_predictions(data: &Dataset, y_star: &DMatrix<f64>) -> Vec<f64> {
        let x = design(data.y());
        let t = DVector::from_column_slice(data.doses().unwrap());
        let b = (x.transpose() * &x)
            .cholesky()
            .unwrap()
            .solve(&(x.transpose() * t));
        (design(y_star) * b).iter().copied().collect()
    }

    #[test]
    fn pls_saturated_equals_ols() {
        let data = noisy(50, 4, 7);
        let m = fit_pls(&data, 4).unwrap();
        let probes = noisy(9, 4, 8);
        let got = m.predict_point(probes.y()).unwrap();
        let want = ols_predictions(&data, probes.y());
        for (g, w) in got.iter().zip(&want) {
            assert!((g - w).abs() < 1e-8, "{g} vs {w}");
        }
    }

    #[test]
    fn pls_rank_one_matches_first_component_regression() {
        // Biomarkers are affine in a single factor u, so the first principal
        // component is u itself up to sign and scale.
        let levels = vec![10.0, 20.0, 30.0];
        let doses: Vec<f64> = (0..30).map(|i| levels[i % 3]).collect();
        let u: Vec<f64> = (0..30).map(|i| ((i * 7919) % 31) as f64 / 3.0).collect();
        let v = [1.0, 2.5, 0.4];
        let rows: Vec<Vec<f64>> = u
            .iter()
            .map(|&s| v.iter().map(|&vj| 5.0 + vj * s).collect())
            .collect();
        let data = Dataset::from_rows(&rows, Some(doses.clone()), levels).unwrap();
        let m = fit_pls(&data, 1).unwrap();
        let ubar = u.iter().sum::<f64>() / 30.0;
        let dbar = doses.iter().sum::<f64>() / 30.0;
        let sxy: f64 = u
            .iter()
            .zip(&doses)
            .map(|(a, b)| (a - ubar) * (b - dbar))
            .sum();
        let sxx: f64 = u.iter().map(|a| (a - ubar).powi(2)).sum();
        for (i, &s) in u.iter().enumerate() {
            let want = dbar + sxy / sxx * (s - ubar);
            assert!((m.predict_row(&rows[i]) - want).abs() < 1e-6);
        }
    }

    #[test]
    fn pls_centroid_predicts_training_mean() {
        let data = noisy(45, 3, 5);
        let m = fit_pls(&data, 2).unwrap();
        let pred = m.predict_row(&m.x_mean.clone());
        assert_eq!(pred, m.y_mean);
    }

    #[test]
    fn pls_scores_are_orthogonal() {
        let m = fit_pls(&noisy(60, 5, 6), 4).unwrap();
        let g = m.scores.transpose() * &m.scores;
        for a in 0..m.n_components {
            for b in 0..m.n_components {
                if a != b {
                    assert!(g[(a, b)].abs() < 1e-8 * (g[(a, a)] * g[(b, b)]).sqrt());
                }
            }
        }
    }

    #[test]
    fn pls_rejects_bad_component_count() {
        let data = noisy(20, 2, 0);
        assert!(fit_pls(&data, 0).is_err());
        assert!(fit_pls(&data, 3).is_err());
    }

    #[test]
    fn pls_intervals_bracket_point_and_are_deterministic() {
        let data = noisy(50, 3, 9);
        let probes = noisy(6, 3, 10);
        let a = predict_pls(&data, 2, probes.y()).unwrap();
        let b = predict_pls(&data, 2, probes.y()).unwrap();
        assert_eq!(a, b);
        for p in &a {
            assert!(p.ci95.0 <= p.median && p.median <= p.ci95.1);
        }
    }
}
