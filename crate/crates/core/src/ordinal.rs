//! Cauchit-link cumulative probabilities, component weights and the
//! ordinal-regression fit that seeds the γ/η prior means.
//!
//! The cumulative probability for cutpoint γ_d is
//! `F(γ_d + η·y) = atan((γ_d + η·y) / 2) / π + 1/2`.

use std::f64::consts::{FRAC_PI_2, PI};

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CauchitModel {
    pub gamma: Vec<f64>,
    pub eta: Vec<f64>,
}

impl CauchitModel {
    pub fn d(&self) -> usize {
        self.gamma.len() + 1
    }

    pub fn validate(&self) -> Result<()> {
        if self.gamma.iter().any(|g| !g.is_finite())
            || self.gamma.windows(2).any(|w| !(w[0] < w[1]))
        {
            return Err(Error::Parameter(
                "cutpoints must be finite and strictly increasing".into(),
            ));
        }
        Ok(())
    }

    pub fn linear_predictor(&self, y: &[f64]) -> Result<f64> {
        if y.len() != self.eta.len() {
            return Err(Error::Dimension {
                what: "biomarker vector",
                expected: self.eta.len(),
                found: y.len(),
            });
        }
        Ok(dot(&self.eta, y))
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// `F(t) = atan(t/2)/π + 1/2`.
pub fn cauchit_cdf(t: f64) -> f64 {
    if t < 0.0 {
        // atan(u) + π/2 = atan(-1/u) for u < 0, no cancellation
        (-2.0 / t).atan() / PI
    } else {
        (t / 2.0).atan() / PI + 0.5
    }
}

/// `dF/dt`.
pub fn cauchit_density(t: f64) -> f64 {
    0.5 / (PI * (1.0 + 0.25 * t * t))
}

/// Cumulative probability `Pr(class <= d)` at cutpoint `gamma_d`.
pub fn cauchit_cumulative(gamma_d: f64, eta: &[f64], y: &[f64]) -> Result<f64> {
    if y.len() != eta.len() {
        return Err(Error::Dimension {
            what: "biomarker vector",
            expected: eta.len(),
            found: y.len(),
        });
    }
    Ok(cauchit_cdf(gamma_d + dot(eta, y)))
}

/// `atan(u) - atan(v)` for `u >= v`, accurate when both lie in the same tail.
fn atan_gap(u: f64, v: f64) -> f64 {
    if v == f64::NEG_INFINITY {
        if u < 0.0 {
            (-1.0 / u).atan()
        } else {
            u.atan() + FRAC_PI_2
        }
    } else if u == f64::INFINITY {
        if v > 0.0 {
            (1.0 / v).atan()
        } else {
            FRAC_PI_2 - v.atan()
        }
    } else if u * v > -1.0 {
        ((u - v) / (1.0 + u * v)).atan()
    } else {
        u.atan() - v.atan()
    }
}

/// Probability of class `d` (zero-based) given cutpoints and linear predictor.
pub fn class_probability(gamma: &[f64], lin: f64, d: usize) -> f64 {
    let upper = if d == gamma.len() {
        f64::INFINITY
    } else {
        0.5 * (gamma[d] + lin)
    };
    let lower = if d == 0 {
        f64::NEG_INFINITY
    } else {
        0.5 * (gamma[d - 1] + lin)
    };
    atan_gap(upper, lower) / PI
}

/// Fill `out` (length D) with the class probabilities.
pub fn weights_from_linear(gamma: &[f64], lin: f64, out: &mut [f64]) {
    debug_assert_eq!(out.len(), gamma.len() + 1);
    for (d, o) in out.iter_mut().enumerate() {
        *o = class_probability(gamma, lin, d);
    }
    let s: f64 = out.iter().sum();
    for o in out.iter_mut() {
        *o /= s;
    }
}

/// Component weights π_d = F(γ_d + η·y) − F(γ_{d−1} + η·y), γ_0 = −∞, γ_D = +∞.
pub fn component_weights(model: &CauchitModel, y: &[f64], d: usize) -> Result<Vec<f64>> {
    model.validate()?;
    if model.d() != d {
        return Err(Error::Dimension {
            what: "number of components",
            expected: d,
            found: model.d(),
        });
    }
    let lin = model.linear_predictor(y)?;
    let mut w = vec![0.0; d];
    weights_from_linear(&model.gamma, lin, &mut w);
    Ok(w)
}

/// Result of the ordinal maximum-likelihood fit.
#[derive(Debug, Clone, PartialEq)]
pub struct OrdinalFit {
    pub model: CauchitModel,
    pub log_likelihood: f64,
    pub iterations: usize,
    /// False when the iteration cap was hit before the gradient test passed.
    pub converged: bool,
}

const COEF_CAP: f64 = 50.0;
const LOG_GAP_MIN: f64 = -20.0;
const MAX_ITER: usize = 500;
const GRAD_TOL: f64 = 1e-6;

/// Unconstrained-ordering parameterization `(γ_1, ln(γ_2−γ_1), …, η)` on
/// standardized biomarkers.
struct Problem<'a> {
    labels: &'a [usize],
    y: DMatrix<f64>,
    d: usize,
    lower: Vec<f64>,
    upper: Vec<f64>,
}

impl Problem<'_> {
    fn gamma_of(&self, x: &[f64]) -> Vec<f64> {
        let mut g = Vec::with_capacity(self.d - 1);
        let mut acc = x[0];
        g.push(acc);
        for k in 1..self.d - 1 {
            acc += x[k].exp();
            g.push(acc);
        }
        g
    }

    /// Mean negative log-likelihood and its gradient.
    fn eval(&self, x: &[f64]) -> (f64, Vec<f64>) {
        let nc = self.d - 1;
        let gamma = self.gamma_of(x);
        let eta = &x[nc..];
        let n = self.labels.len();
        let mut f = 0.0;
        let mut g_gamma = vec![0.0; nc];
        let mut g_eta = vec![0.0; eta.len()];
        for (i, &c) in self.labels.iter().enumerate() {
            let lin: f64 = eta
                .iter()
                .enumerate()
                .map(|(j, e)| e * self.y[(i, j)])
                .sum();
            let prob = class_probability(&gamma, lin, c).max(f64::MIN_POSITIVE);
            f -= prob.ln();
            let fa = if c < nc {
                cauchit_density(gamma[c] + lin)
            } else {
                0.0
            };
            let fb = if c > 0 {
                cauchit_density(gamma[c - 1] + lin)
            } else {
                0.0
            };
            if c < nc {
                g_gamma[c] -= fa / prob;
            }
            if c > 0 {
                g_gamma[c - 1] += fb / prob;
            }
            let dl = (fa - fb) / prob;
            for (j, ge) in g_eta.iter_mut().enumerate() {
                *ge -= dl * self.y[(i, j)];
            }
        }
        let mut grad = vec![0.0; x.len()];
        // dγ_k/dx_0 = 1, dγ_k/dx_m = exp(x_m) for 1 <= m <= k
        let mut tail = 0.0;
        for k in (0..nc).rev() {
            tail += g_gamma[k];
            grad[k] = if k == 0 { tail } else { tail * x[k].exp() };
        }
        grad[nc..].copy_from_slice(&g_eta);
        let nf = n as f64;
        (f / nf, grad.into_iter().map(|v| v / nf).collect())
    }

    fn project(&self, x: &mut [f64]) {
        for (k, v) in x.iter_mut().enumerate() {
            *v = v.clamp(self.lower[k], self.upper[k]);
        }
    }

    /// Gradient with components that push against an active bound zeroed.
    fn projected_gradient(&self, x: &[f64], g: &[f64]) -> Vec<f64> {
        x.iter()
            .zip(g)
            .enumerate()
            .map(|(k, (&xk, &gk))| {
                if (xk <= self.lower[k] && gk > 0.0) || (xk >= self.upper[k] && gk < 0.0) {
                    0.0
                } else {
                    gk
                }
            })
            .collect()
    }
}

fn inf_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

/// Bounded BFGS: the inverse-Hessian direction is restricted to free
/// coordinates, and each trial point is projected back into the box before
/// the Armijo test.
fn minimize(pb: &Problem, mut x: Vec<f64>) -> (Vec<f64>, f64, usize, bool) {
    let m = x.len();
    pb.project(&mut x);
    let (mut f, mut g) = pb.eval(&x);
    let mut h = DMatrix::<f64>::identity(m, m);
    for iter in 0..MAX_ITER {
        let pg = pb.projected_gradient(&x, &g);
        if inf_norm(&pg) < GRAD_TOL {
            return (x, f, iter, true);
        }
        let free: Vec<bool> = (0..m).map(|k| pg[k] != 0.0 || g[k] == 0.0).collect();
        let mut dir = vec![0.0; m];
        for r in 0..m {
            if free[r] {
                dir[r] = -(0..m)
                    .filter(|&c| free[c])
                    .map(|c| h[(r, c)] * g[c])
                    .sum::<f64>();
            }
        }
        let mut slope: f64 = dir.iter().zip(&g).map(|(a, b)| a * b).sum();
        if !(slope < 0.0) {
            h = DMatrix::identity(m, m);
            dir = pg.iter().map(|v| -v).collect();
            slope = -pg.iter().map(|v| v * v).sum::<f64>();
        }
        let mut t = 1.0;
        let mut accepted = None;
        for _ in 0..60 {
            let mut xn: Vec<f64> = x.iter().zip(&dir).map(|(a, b)| a + t * b).collect();
            pb.project(&mut xn);
            let (fn_, gn) = pb.eval(&xn);
            let moved: f64 = xn.iter().zip(&x).map(|(a, b)| (a - b) * (a - b)).sum();
            if fn_.is_finite() && fn_ <= f + 1e-4 * t * slope.min(0.0) && moved > 0.0 {
                accepted = Some((xn, fn_, gn));
                break;
            }
            t *= 0.5;
        }
        let Some((xn, fn_, gn)) = accepted else {
            // no progress possible along any admissible direction
            let pg = pb.projected_gradient(&x, &g);
            return (x, f, iter, inf_norm(&pg) < GRAD_TOL);
        };
        let s: Vec<f64> = xn.iter().zip(&x).map(|(a, b)| a - b).collect();
        let yv: Vec<f64> = gn.iter().zip(&g).map(|(a, b)| a - b).collect();
        let sy: f64 = s.iter().zip(&yv).map(|(a, b)| a * b).sum();
        if sy > 1e-12 {
            let sv = nalgebra::DVector::from_vec(s);
            let yv = nalgebra::DVector::from_vec(yv);
            let rho = 1.0 / sy;
            let i = DMatrix::<f64>::identity(m, m);
            let a = &i - rho * &sv * yv.transpose();
            let b = &i - rho * &yv * sv.transpose();
            h = &a * &h * &b + rho * &sv * sv.transpose();
        }
        let improvement = f - fn_;
        x = xn;
        f = fn_;
        g = gn;
        if improvement.abs() < 1e-15 * (1.0 + f.abs())
            && inf_norm(&pb.projected_gradient(&x, &g)) < GRAD_TOL
        {
            return (x, f, iter + 1, true);
        }
    }
    let pg = pb.projected_gradient(&x, &g);
    (x, f, MAX_ITER, inf_norm(&pg) < GRAD_TOL)
}

/// Maximum-likelihood cumulative-Cauchit regression of class labels on biomarkers.
///
/// `labels` are zero-based classes in `0..d`. Biomarker columns are
/// standardized before optimization and coefficients mapped back afterwards.
/// In standardized units γ_1 and every η_p are held within ±50 and each
/// cutpoint gap within `[e^-20, 100]`, which keeps separated data bounded.
pub fn fit_ordinal_cauchit_mle(labels: &[usize], y: &DMatrix<f64>, d: usize) -> Result<OrdinalFit> {
    let n = labels.len();
    if y.nrows() != n {
        return Err(Error::Dimension {
            what: "label count",
            expected: y.nrows(),
            found: n,
        });
    }
    if d < 2 {
        return Err(Error::Data(
            "ordinal regression needs at least two classes".into(),
        ));
    }
    let mut counts = vec![0usize; d];
    for &l in labels {
        if l >= d {
            return Err(Error::Data(format!("label {} outside 1..={d}", l + 1)));
        }
        counts[l] += 1;
    }
    if let Some(k) = counts.iter().position(|&c| c == 0) {
        return Err(Error::Data(format!("class {} has no observations", k + 1)));
    }
    let p = y.ncols();
    let mut centre = vec![0.0; p];
    let mut spread = vec![1.0; p];
    for j in 0..p {
        let col = y.column(j);
        let m = col.mean();
        let s = (col.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (n.max(2) - 1) as f64).sqrt();
        centre[j] = m;
        spread[j] = if s > 0.0 && s.is_finite() { s } else { 1.0 };
    }
    let ys = DMatrix::from_fn(n, p, |i, j| (y[(i, j)] - centre[j]) / spread[j]);

    let nc = d - 1;
    let mut lower = vec![-COEF_CAP; nc + p];
    let mut upper = vec![COEF_CAP; nc + p];
    for k in 1..nc {
        lower[k] = LOG_GAP_MIN;
        upper[k] = 100f64.ln();
    }
    let pb = Problem {
        labels,
        y: ys,
        d,
        lower,
        upper,
    };

    // cutpoints from cumulative class proportions, η = 0
    let mut x0 = vec![0.0; nc + p];
    let mut cum = 0.0;
    let mut prev = 0.0;
    for k in 0..nc {
        cum += counts[k] as f64 / n as f64;
        let g = 2.0 * (PI * (cum - 0.5)).tan();
        x0[k] = if k == 0 { g } else { (g - prev).max(1e-6).ln() };
        prev = g;
    }
    let (x, f, iterations, converged) = minimize(&pb, x0);

    let gamma_std = pb.gamma_of(&x);
    let eta_std = &x[nc..];
    let eta: Vec<f64> = eta_std.iter().zip(&spread).map(|(e, s)| e / s).collect();
    let offset: f64 = eta.iter().zip(&centre).map(|(e, m)| e * m).sum();
    let gamma: Vec<f64> = gamma_std.iter().map(|g| g - offset).collect();
    let model = CauchitModel { gamma, eta };
    if model.validate().is_err() {
        return Err(Error::Data(
            "ordinal fit produced non-increasing cutpoints".into(),
        ));
    }
    Ok(OrdinalFit {
        model,
        log_likelihood: -f * n as f64,
        iterations,
        converged,
    })
}

/// Log-likelihood `Σ_i log π_{i, c_i}` of a Cauchit model.
pub fn log_likelihood(model: &CauchitModel, labels: &[usize], y: &DMatrix<f64>) -> f64 {
    labels
        .iter()
        .enumerate()
        .map(|(i, &c)| {
            let lin: f64 = model
                .eta
                .iter()
                .enumerate()
                .map(|(j, e)| e * y[(i, j)])
                .sum();
            class_probability(&model.gamma, lin, c).ln()
        })
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stats::RngStream;
    use proptest::prelude::*;

    #[test]
    fn cumulative_examples() {
        assert!((cauchit_cumulative(0.0, &[1.0], &[0.0]).unwrap() - 0.5).abs() < 1e-15);
        assert!((cauchit_cumulative(2.0, &[0.0], &[5.0]).unwrap() - 0.75).abs() < 1e-15);
        assert!(cauchit_cumulative(1e300, &[0.0], &[0.0]).unwrap() > 1.0 - 1e-15);
        assert!(cauchit_cumulative(-1e300, &[0.0], &[0.0]).unwrap() < 1e-15);
        assert!(cauchit_cumulative(0.0, &[1.0, 2.0], &[1.0]).is_err());
    }

    #[test]
    fn weights_example() {
        let m = CauchitModel {
            gamma: vec![-1.0, 1.0],
            eta: vec![0.0],
        };
        let w = component_weights(&m, &[3.0], 3).unwrap();
        // (1/π)(atan(∓0.5) + π/2)
        let f1 = ((-0.5f64).atan() + FRAC_PI_2) / PI;
        let want = [f1, 1.0 - 2.0 * f1, f1];
        for (a, b) in w.iter().zip(want) {
            assert!((a - b).abs() < 1e-15);
        }
        assert!(
            (w[0] - 0.35242).abs() < 1e-5 && (w[1] - 0.29516).abs() < 1e-5,
            "{w:?}"
        );
        let bad = CauchitModel {
            gamma: vec![1.0, -1.0],
            eta: vec![0.0],
        };
        assert!(component_weights(&bad, &[0.0], 3).is_err());
    }

    #[test]
    fn far_tail_weights_are_accurate() {
        // both cutpoints far in the upper tail: naive F(a) - F(b) loses everything
        let gamma = [1e8, 2e8];
        let w = class_probability(&gamma, 0.0, 1);
        let want = ((0.5e8f64).recip().atan() - (1e8f64).recip().atan()) / PI;
        assert!((w - want).abs() / want < 1e-12);
        assert!(class_probability(&gamma, 0.0, 0) > 0.99999);
    }

    proptest! {
        #[test]
        fn link_symmetry(g in -1e3f64..1e3, e in proptest::collection::vec(-10.0f64..10.0, 1..5), y in proptest::collection::vec(0.0f64..50.0, 5)) {
            let y = &y[..e.len()];
            let neg: Vec<f64> = e.iter().map(|v| -v).collect();
            let a = cauchit_cumulative(g, &e, y).unwrap();
            let b = cauchit_cumulative(-g, &neg, y).unwrap();
            prop_assert!((a + b - 1.0).abs() < 1e-12);
        }

        #[test]
        fn weights_form_simplex(mut gs in proptest::collection::vec(-1e4f64..1e4, 1..6), lin in -1e4f64..1e4) {
            gs.sort_by(f64::total_cmp);
            gs.dedup();
            let mut w = vec![0.0; gs.len() + 1];
            weights_from_linear(&gs, lin, &mut w);
            prop_assert!(w.iter().all(|v| *v >= 0.0));
            prop_assert!((w.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            // mass below each cutpoint is monotone in the cutpoint
            for k in 0..gs.len() {
                let below: f64 = w[..=k].iter().sum();
                let mut up = gs.clone();
                up[k] += 1.0;
                if k + 1 < gs.len() && up[k] >= gs[k + 1] { continue; }
                let mut w2 = vec![0.0; gs.len() + 1];
                weights_from_linear(&up, lin, &mut w2);
                prop_assert!(w2[..=k].iter().sum::<f64>() >= below - 1e-12);
            }
        }

        #[test]
        fn symmetric_cutpoints_give_symmetric_weights(h in 0.01f64..100.0, lin in -50.0f64..50.0) {
            let mut w = vec![0.0; 3];
            weights_from_linear(&[-h - lin, h - lin], lin, &mut w);
            prop_assert!((w[0] - w[2]).abs() < 1e-12);
        }
    }

    fn argmax(w: &[f64]) -> usize {
        let mut best = 0;
        for (k, v) in w.iter().enumerate() {
            if *v > w[best] {
                best = k;
            }
        }
        best
    }

    #[test]
    fn separable_data_classified_exactly() {
        let ys: Vec<f64> = (0..40).map(|i| i as f64 * 0.25).collect();
        let labels: Vec<usize> = ys.iter().map(|&v| usize::from(v > 5.0)).collect();
        let y = DMatrix::from_column_slice(40, 1, &ys);
        let fit = fit_ordinal_cauchit_mle(&labels, &y, 2).unwrap();
        let mut w = vec![0.0; 2];
        for (i, &l) in labels.iter().enumerate() {
            weights_from_linear(&fit.model.gamma, fit.model.eta[0] * ys[i], &mut w);
            assert_eq!(argmax(&w), l, "row {i}");
        }
        // the cutpoint class probabilities must decrease with y, so η < 0
        assert!(fit.model.eta[0] < 0.0);
    }

    #[test]
    fn null_labels_give_small_eta() {
        let mut rng = RngStream::new(9);
        let n = 600;
        let labels: Vec<usize> = (0..n).map(|i| i % 3).collect();
        let y = DMatrix::from_fn(n, 2, |_, _| rng.standard_normal());
        let fit = fit_ordinal_cauchit_mle(&labels, &y, 3).unwrap();
        assert!(fit.converged);
        assert!(
            fit.model.eta.iter().all(|e| e.abs() < 0.5),
            "{:?}",
            fit.model.eta
        );
        let mut w = vec![0.0; 3];
        let hits = (0..n)
            .filter(|&i| {
                weights_from_linear(
                    &fit.model.gamma,
                    fit.model.eta[0] * y[(i, 0)] + fit.model.eta[1] * y[(i, 1)],
                    &mut w,
                );
                argmax(&w) == labels[i]
            })
            .count();
        let acc = hits as f64 / n as f64;
        assert!((acc - 1.0 / 3.0).abs() < 0.1, "accuracy {acc}");
    }

    /// Binary Cauchit MLE by Newton's method on (γ, η) with exact derivatives
    /// of `log F(γ + ηy)` and `log(1 - F(γ + ηy))`.
    fn binary_newton(labels: &[usize], ys: &[f64]) -> (f64, f64) {
        let mut th = [0.0f64, 0.0];
        for _ in 0..200 {
            let mut g = [0.0; 2];
            let mut h = [[0.0; 2]; 2];
            for (&l, &y) in labels.iter().zip(ys) {
                let t = th[0] + th[1] * y;
                let f = cauchit_cdf(t);
                let dens = cauchit_density(t);
                let ddens = -dens * 0.5 * t / (1.0 + 0.25 * t * t);
                let (d1, d2) = if l == 0 {
                    (dens / f, ddens / f - (dens / f).powi(2))
                } else {
                    (
                        -dens / (1.0 - f),
                        -ddens / (1.0 - f) - (dens / (1.0 - f)).powi(2),
                    )
                };
                let x = [1.0, y];
                for a in 0..2 {
                    g[a] += d1 * x[a];
                    for b in 0..2 {
                        h[a][b] += d2 * x[a] * x[b];
                    }
                }
            }
            let det = h[0][0] * h[1][1] - h[0][1] * h[1][0];
            let step = [
                (h[1][1] * g[0] - h[0][1] * g[1]) / det,
                (h[0][0] * g[1] - h[1][0] * g[0]) / det,
            ];
            th[0] -= step[0];
            th[1] -= step[1];
            if step[0].abs() + step[1].abs() < 1e-13 {
                break;
            }
        }
        (th[0], th[1])
    }

    #[test]
    fn binary_case_matches_newton_oracle() {
        let mut rng = RngStream::new(21);
        let n = 400;
        let ys: Vec<f64> = (0..n).map(|_| 3.0 + rng.standard_normal()).collect();
        let labels: Vec<usize> = ys
            .iter()
            .map(|&y| usize::from(rng.uniform() > cauchit_cdf(-2.0 + 0.8 * y)))
            .collect();
        let fit =
            fit_ordinal_cauchit_mle(&labels, &DMatrix::from_column_slice(n, 1, &ys), 2).unwrap();
        let (g, e) = binary_newton(&labels, &ys);
        assert!(fit.converged);
        assert!(
            (fit.model.gamma[0] - g).abs() < 1e-4,
            "{} vs {g}",
            fit.model.gamma[0]
        );
        assert!(
            (fit.model.eta[0] - e).abs() < 1e-4,
            "{} vs {e}",
            fit.model.eta[0]
        );
    }

    #[test]
    fn empty_class_is_data_error() {
        let y = DMatrix::from_column_slice(4, 1, &[1.0, 2.0, 3.0, 4.0]);
        assert!(matches!(
            fit_ordinal_cauchit_mle(&[0, 0, 2, 2], &y, 3),
            Err(Error::Data(_))
        ));
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let mut rng = RngStream::new(5);
        let n = 50;
        let y = DMatrix::from_fn(n, 2, |_, _| rng.standard_normal());
        let labels: Vec<usize> = (0..n).map(|i| i % 4).collect();
        let pb = Problem {
            labels: &labels,
            y,
            d: 4,
            lower: vec![-50.0; 5],
            upper: vec![50.0; 5],
        };
        let x = [-0.7, -0.3, 0.2, 0.4, -0.9];
        let (_, g) = pb.eval(&x);
        for k in 0..x.len() {
            let mut a = x;
            let mut b = x;
            a[k] += 1e-6;
            b[k] -= 1e-6;
            let fd = (pb.eval(&a).0 - pb.eval(&b).0) / 2e-6;
            assert!((fd - g[k]).abs() < 1e-7, "coord {k}: {fd} vs {}", g[k]);
        }
    }
}
