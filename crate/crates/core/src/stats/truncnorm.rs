use serde::{Deserialize, Serialize};

use super::normal;
use super::rng::RngStream;
use crate::error::{Error, Result};

/// Normal distribution restricted to `[lower, upper]`.
///
/// `mean` and `variance` describe the parent (untruncated) normal. Bounds may
/// be infinite.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TruncNormalParams {
    pub mean: f64,
    pub variance: f64,
    pub lower: f64,
    pub upper: f64,
}

/// Standardized lower bound above which the exponential-rejection tail sampler
/// replaces inverse-CDF sampling.
const TAIL_SWITCH: f64 = 4.0;

impl TruncNormalParams {
    pub fn new(mean: f64, variance: f64, lower: f64, upper: f64) -> Result<Self> {
        let p = TruncNormalParams {
            mean,
            variance,
            lower,
            upper,
        };
        p.validate()?;
        Ok(p)
    }

    /// Normal truncated to `[0, inf)`.
    pub fn nonnegative(mean: f64, variance: f64) -> Result<Self> {
        Self::new(mean, variance, 0.0, f64::INFINITY)
    }

    pub fn validate(&self) -> Result<()> {
        if !self.mean.is_finite() {
            return Err(Error::Parameter(format!(
                "truncated normal mean must be finite, got {}",
                self.mean
            )));
        }
        if !(self.variance > 0.0 && self.variance.is_finite()) {
            return Err(Error::Parameter(format!(
                "truncated normal variance must be positive and finite, got {}",
                self.variance
            )));
        }
        if self.lower.is_nan() || self.upper.is_nan() || self.lower >= self.upper {
            return Err(Error::Parameter(format!(
                "truncation bounds must satisfy lower < upper, got [{}, {}]",
                self.lower, self.upper
            )));
        }
        Ok(())
    }

    pub fn sd(&self) -> f64 {
        self.variance.sqrt()
    }

    fn standardized(&self) -> (f64, f64) {
        let sd = self.sd();
        ((self.lower - self.mean) / sd, (self.upper - self.mean) / sd)
    }

    /// Log of the probability the parent normal assigns to the interval.
    pub fn log_mass(&self) -> f64 {
        let (a, b) = self.standardized();
        if a >= b {
            return f64::NEG_INFINITY;
        }
        normal::log_interval_mass(a, b)
    }

    fn degenerate(&self) -> Error {
        Error::DegenerateInterval {
            mean: self.mean,
            variance: self.variance,
            lower: self.lower,
            upper: self.upper,
        }
    }

    /// Analytic mean of the truncated distribution.
    pub fn truncated_mean(&self) -> f64 {
        let (a, b) = self.standardized();
        let lz = self.log_mass();
        let pa = if a.is_finite() {
            (normal::log_pdf(a) - lz).exp()
        } else {
            0.0
        };
        let pb = if b.is_finite() {
            (normal::log_pdf(b) - lz).exp()
        } else {
            0.0
        };
        self.mean + self.sd() * (pa - pb)
    }

    /// Analytic CDF of the truncated distribution.
    pub fn cdf(&self, x: f64) -> f64 {
        if x <= self.lower {
            return 0.0;
        }
        if x >= self.upper {
            return 1.0;
        }
        let (a, _) = self.standardized();
        let s = (x - self.mean) / self.sd();
        (normal::log_interval_mass(a, s) - self.log_mass())
            .exp()
            .min(1.0)
    }
}

/// Log density of the normalized truncated normal; `-inf` outside the bounds.
pub fn log_density_truncated_normal(x: f64, p: &TruncNormalParams) -> Result<f64> {
    p.validate()?;
    if x < p.lower || x > p.upper || x.is_nan() {
        return Ok(f64::NEG_INFINITY);
    }
    let lz = p.log_mass();
    if !lz.is_finite() {
        return Err(p.degenerate());
    }
    let sd = p.sd();
    Ok(normal::log_pdf((x - p.mean) / sd) - sd.ln() - lz)
}

/// Draw from a truncated normal.
///
/// Inside the central regime the draw is an inverse-CDF transform, evaluated
/// on whichever tail keeps the probabilities away from 1. When the interval
/// lies more than four standard deviations beyond the mean, Robert's
/// exponential-proposal rejection sampler is used instead (or a uniform
/// proposal when the interval is narrower than the exponential's scale), so
/// the expected number of proposals stays bounded for any truncation point.
pub fn sample_truncated_normal(p: &TruncNormalParams, rng: &mut RngStream) -> Result<f64> {
    p.validate()?;
    if !p.log_mass().is_finite() {
        return Err(p.degenerate());
    }
    let (a, b) = p.standardized();
    let z = if a > TAIL_SWITCH {
        tail_sample(a, b, rng)
    } else if b < -TAIL_SWITCH {
        -tail_sample(-b, -a, rng)
    } else {
        inverse_cdf_sample(a, b, rng)
    };
    let x = (p.mean + p.sd() * z).clamp(p.lower, p.upper);
    debug_assert!(x >= p.lower && x <= p.upper);
    Ok(x)
}

fn inverse_cdf_sample(a: f64, b: f64, rng: &mut RngStream) -> f64 {
    let u = rng.uniform();
    if a >= 0.0 {
        // upper half: interpolate survival probabilities
        let sa = normal::sf(a);
        let sb = normal::sf(b);
        normal::upper_tail_quantile(sb + u * (sa - sb))
    } else {
        let fa = normal::cdf(a);
        let fb = normal::cdf(b);
        normal::quantile(fa + u * (fb - fa))
    }
}

/// Standard normal restricted to `[a, b]` with `a > 0` far in the upper tail.
fn tail_sample(a: f64, b: f64, rng: &mut RngStream) -> f64 {
    if (b - a) * a < 1.0 {
        // narrow interval: uniform proposal, acceptance >= exp(-(b-a)(b+a)/2) > e^-1.5
        loop {
            let z = a + (b - a) * rng.uniform();
            if rng.uniform().ln() <= -0.5 * (z * z - a * a) {
                return z;
            }
        }
    }
    let lambda = 0.5 * (a + (a * a + 4.0).sqrt());
    loop {
        let z = a + rng.exponential() / lambda;
        if z > b {
            continue;
        }
        let d = z - lambda;
        if rng.uniform().ln() <= -0.5 * d * d {
            return z;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn moments(p: &TruncNormalParams, n: usize, seed: u64) -> (f64, f64) {
        let mut rng = RngStream::new(seed);
        let mut s = 0.0;
        let mut s2 = 0.0;
        for _ in 0..n {
            let x = sample_truncated_normal(p, &mut rng).unwrap();
            assert!(x >= p.lower && x <= p.upper);
            s += x;
            s2 += x * x;
        }
        let m = s / n as f64;
        (m, (s2 / n as f64 - m * m).sqrt() / (n as f64).sqrt())
    }

    #[test]
    fn untruncated_mean_is_zero() {
        let p = TruncNormalParams::new(0.0, 1.0, f64::NEG_INFINITY, f64::INFINITY).unwrap();
        let (m, se) = moments(&p, 100_000, 1);
        assert!(m.abs() < 3.0 * se, "{m} ± {se}");
    }

    #[test]
    fn half_normal_mean() {
        let p = TruncNormalParams::nonnegative(0.0, 1.0).unwrap();
        let (m, se) = moments(&p, 100_000, 2);
        let want = (2.0 / std::f64::consts::PI).sqrt();
        assert!((m - want).abs() < 3.0 * se, "{m} vs {want} ± {se}");
        assert!((p.truncated_mean() - want).abs() < 1e-14);
    }

    #[test]
    fn distant_truncation_point_has_no_effect() {
        let p = TruncNormalParams::nonnegative(10.0, 1.0).unwrap();
        let (m, se) = moments(&p, 100_000, 3);
        assert!((m - 10.0).abs() < 3.0 * se);
    }

    #[test]
    fn far_tail_terminates_and_matches_analytic_mean() {
        // lower bound 30 sd above the mean
        let p = TruncNormalParams::nonnegative(-30.0, 1.0).unwrap();
        let (m, se) = moments(&p, 100_000, 4);
        let want = p.truncated_mean();
        assert!((m - want).abs() < 3.0 * se + 1e-12, "{m} vs {want}");
        // two-sided narrow tail interval
        let p = TruncNormalParams::new(0.0, 1.0, 8.0, 8.01).unwrap();
        let (m, se) = moments(&p, 20_000, 5);
        assert!((m - p.truncated_mean()).abs() < 3.0 * se + 1e-9);
        // mirrored lower tail
        let p = TruncNormalParams::new(50.0, 4.0, f64::NEG_INFINITY, 0.0).unwrap();
        let (m, se) = moments(&p, 50_000, 6);
        assert!((m - p.truncated_mean()).abs() < 3.0 * se + 1e-12);
    }

    #[test]
    fn invalid_and_degenerate() {
        assert!(matches!(
            TruncNormalParams::new(0.0, 0.0, 0.0, 1.0),
            Err(Error::Parameter(_))
        ));
        assert!(matches!(
            TruncNormalParams::new(0.0, 1.0, 2.0, 1.0),
            Err(Error::Parameter(_))
        ));
        // interval far narrower than one ulp of the standardized scale
        let p = TruncNormalParams::new(0.0, 1e40, 1.0, 2.0).unwrap();
        let mut rng = RngStream::new(0);
        assert!(matches!(
            sample_truncated_normal(&p, &mut rng),
            Err(Error::DegenerateInterval { .. })
        ));
    }

    #[test]
    fn log_density_examples() {
        let half = TruncNormalParams::nonnegative(0.0, 1.0).unwrap();
        assert_eq!(
            log_density_truncated_normal(-1.0, &half).unwrap(),
            f64::NEG_INFINITY
        );
        let std = TruncNormalParams::new(0.0, 1.0, f64::NEG_INFINITY, f64::INFINITY).unwrap();
        let want = -0.5 * (2.0 * std::f64::consts::PI).ln();
        assert!((log_density_truncated_normal(0.0, &std).unwrap() - want).abs() < 1e-15);
        let want = -0.5 * (2.0 * std::f64::consts::PI).ln() - 0.125 + 2f64.ln();
        assert!((log_density_truncated_normal(0.5, &half).unwrap() - want).abs() < 1e-14);
    }
}
