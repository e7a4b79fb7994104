use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Per-column affine transform `(y - mean) / sd + shift`, with
/// `shift = 2 |min standardized value|` computed on the fitting data.
///
/// The transform is fitted once on training biomarkers and re-applied
/// unchanged to any later biomarker-only data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BiomarkerScaling {
    pub mean: Vec<f64>,
    pub sd: Vec<f64>,
    pub shift: Vec<f64>,
}

impl BiomarkerScaling {
    pub fn fit(y: &DMatrix<f64>) -> Result<Self> {
        let n = y.nrows();
        let mut mean = Vec::with_capacity(y.ncols());
        let mut sd = Vec::with_capacity(y.ncols());
        let mut shift = Vec::with_capacity(y.ncols());
        for (j, col) in y.column_iter().enumerate() {
            if n < 2 {
                return Err(Error::DegenerateColumn(j));
            }
            let m = col.iter().sum::<f64>() / n as f64;
            let s = (col.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (n as f64 - 1.0)).sqrt();
            if !(s > 0.0) || !s.is_finite() {
                return Err(Error::DegenerateColumn(j));
            }
            let min_std = col
                .iter()
                .map(|v| (v - m) / s)
                .fold(f64::INFINITY, f64::min);
            mean.push(m);
            sd.push(s);
            shift.push(2.0 * min_std.abs());
        }
        Ok(BiomarkerScaling { mean, sd, shift })
    }

    pub fn p(&self) -> usize {
        self.mean.len()
    }

    pub fn apply(&self, y: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        if y.ncols() != self.p() {
            return Err(Error::Dimension {
                what: "biomarker columns",
                expected: self.p(),
                found: y.ncols(),
            });
        }
        Ok(DMatrix::from_fn(y.nrows(), y.ncols(), |i, j| {
            (y[(i, j)] - self.mean[j]) / self.sd[j] + self.shift[j]
        }))
    }

    pub fn apply_row(&self, row: &[f64]) -> Vec<f64> {
        row.iter()
            .enumerate()
            .map(|(j, v)| (v - self.mean[j]) / self.sd[j] + self.shift[j])
            .collect()
    }
}

/// Fit and apply the scaling transform in one step.
pub fn scale_biomarkers(y: &DMatrix<f64>) -> Result<(DMatrix<f64>, BiomarkerScaling)> {
    let s = BiomarkerScaling::fit(y)?;
    Ok((s.apply(y)?, s))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn col(v: &[f64]) -> DMatrix<f64> {
        DMatrix::from_column_slice(v.len(), 1, v)
    }

    #[test]
    fn small_column() {
        let (s, _) = scale_biomarkers(&col(&[1.0, 2.0, 3.0])).unwrap();
        for (got, want) in s.iter().zip([1.0, 2.0, 3.0]) {
            assert!((got - want).abs() < 1e-15);
        }
    }

    #[test]
    fn huge_column() {
        let (s, _) = scale_biomarkers(&col(&[1e7, 2e7, 3e7])).unwrap();
        for (got, want) in s.iter().zip([1.0, 2.0, 3.0]) {
            assert!((got - want).abs() < 1e-12);
        }
    }

    #[test]
    fn constant_column_rejected() {
        let y = DMatrix::from_row_slice(3, 2, &[1.0, 5.0, 2.0, 5.0, 3.0, 5.0]);
        assert!(matches!(
            scale_biomarkers(&y),
            Err(Error::DegenerateColumn(1))
        ));
    }

    fn corr(a: &[f64], b: &[f64]) -> f64 {
        let n = a.len() as f64;
        let ma = a.iter().sum::<f64>() / n;
        let mb = b.iter().sum::<f64>() / n;
        let cov: f64 = a.iter().zip(b).map(|(x, y)| (x - ma) * (y - mb)).sum();
        let va: f64 = a.iter().map(|x| (x - ma).powi(2)).sum();
        let vb: f64 = b.iter().map(|y| (y - mb).powi(2)).sum();
        cov / (va * vb).sqrt()
    }

    proptest! {
        #[test]
        fn affine_map_preserves_correlations(
            data in proptest::collection::vec((0.0f64..1e3, 0.0f64..1e6, 0.0f64..1.0), 5..40)
        ) {
            let n = data.len();
            let y = DMatrix::from_fn(n, 3, |i, j| match j { 0 => data[i].0, 1 => data[i].1, _ => data[i].2 });
            prop_assume!(BiomarkerScaling::fit(&y).is_ok());
            let (s, _) = scale_biomarkers(&y).unwrap();
            for j in 0..3 {
                let orig: Vec<f64> = y.column(j).iter().copied().collect();
                let sc: Vec<f64> = s.column(j).iter().copied().collect();
                prop_assert!((corr(&orig, &sc) - 1.0).abs() < 1e-12);
                prop_assert!(sc.iter().all(|v| *v >= -1e-12));
                for k in 0..3 {
                    let ok: Vec<f64> = y.column(k).iter().copied().collect();
                    let sk: Vec<f64> = s.column(k).iter().copied().collect();
                    prop_assert!((corr(&orig, &ok) - corr(&sc, &sk)).abs() < 1e-12);
                }
            }
        }
    }
}
