//! Random-variate kernels and densities used throughout the model.

pub mod gamma;
pub mod normal;
pub mod rng;
pub mod truncnorm;

pub use gamma::{sample_inverse_gamma, InvGammaParams};
pub use rng::RngStream;
pub use truncnorm::{log_density_truncated_normal, sample_truncated_normal, TruncNormalParams};

use crate::error::{Error, Result};

/// Draw an index with probability proportional to `weights`.
pub fn sample_categorical(weights: &[f64], rng: &mut RngStream) -> Result<usize> {
    let mut total = 0.0;
    for (d, &w) in weights.iter().enumerate() {
        if !(w >= 0.0) || !w.is_finite() {
            return Err(Error::Parameter(format!("categorical weight {d} is {w}")));
        }
        total += w;
    }
    if total <= 0.0 {
        return Err(Error::Parameter("categorical weights are all zero".into()));
    }
    let target = rng.uniform() * total;
    let mut acc = 0.0;
    let mut last = 0;
    for (d, &w) in weights.iter().enumerate() {
        if w > 0.0 {
            last = d;
            acc += w;
            if target < acc {
                return Ok(d);
            }
        }
    }
    Ok(last)
}

/// Sample quantile with linear interpolation between order statistics
/// (Hyndman–Fan type 7). `sorted` must be ascending and nonempty.
pub fn quantile_sorted(sorted: &[f64], prob: f64) -> f64 {
    let n = sorted.len();
    debug_assert!(n > 0);
    let h = (n - 1) as f64 * prob;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(n - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

pub fn sorted_copy(xs: &[f64]) -> Vec<f64> {
    let mut v = xs.to_vec();
    v.sort_by(|a, b| a.total_cmp(b));
    v
}

pub fn median(xs: &[f64]) -> f64 {
    quantile_sorted(&sorted_copy(xs), 0.5)
}

pub fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Sample variance with the `n - 1` denominator.
pub fn variance(xs: &[f64]) -> f64 {
    let m = mean(xs);
    xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (xs.len() as f64 - 1.0)
}
