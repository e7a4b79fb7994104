use nalgebra::DMatrix;
use sha2::{Digest, Sha256};

use crate::error::{Error, Result, Violation};

/// Biomarker measurements with optional consumed quantities.
///
/// `y` is `n x P`. `doses`, when present, holds the food quantity consumed by
/// each observation (intervention-study data); biomarker-only data has none.
/// `levels` are the ordered food quantities `X_1 < ... < X_D` of the study.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    y: DMatrix<f64>,
    doses: Option<Vec<f64>>,
    levels: Vec<f64>,
}

fn same_quantity(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-9 * a.abs().max(b.abs()).max(1.0)
}

/// Check every dataset invariant, collecting all violations.
pub fn validate_dataset(
    y: DMatrix<f64>,
    doses: Option<Vec<f64>>,
    levels: Vec<f64>,
) -> Result<Dataset> {
    let mut bad = Vec::new();
    if y.nrows() == 0 || y.ncols() == 0 || levels.is_empty() {
        bad.push(Violation::Empty);
    }
    for col in 0..y.ncols() {
        for row in 0..y.nrows() {
            let v = y[(row, col)];
            if !v.is_finite() {
                bad.push(Violation::NonFiniteBiomarker { row, col });
            } else if v < 0.0 {
                bad.push(Violation::NegativeBiomarker { row, col, value: v });
            }
        }
    }
    for (index, w) in levels.windows(2).enumerate() {
        if !(w[0] < w[1]) {
            bad.push(Violation::LevelsNotIncreasing {
                index: index + 1,
                prev: w[0],
                next: w[1],
            });
        }
    }
    if let Some(x) = &doses {
        if x.len() != y.nrows() {
            bad.push(Violation::ShapeMismatch {
                what: "dose column length",
                expected: y.nrows(),
                found: x.len(),
            });
        }
        for (row, &dose) in x.iter().enumerate() {
            if !levels.iter().any(|&l| same_quantity(l, dose)) {
                bad.push(Violation::DoseNotInLevels { row, dose });
            }
        }
    }
    if !bad.is_empty() {
        return Err(Error::InvalidDataset(bad));
    }
    Ok(Dataset { y, doses, levels })
}

impl Dataset {
    pub fn new(y: DMatrix<f64>, doses: Option<Vec<f64>>, levels: Vec<f64>) -> Result<Self> {
        validate_dataset(y, doses, levels)
    }

    /// Build from row vectors.
    pub fn from_rows(rows: &[Vec<f64>], doses: Option<Vec<f64>>, levels: Vec<f64>) -> Result<Self> {
        let n = rows.len();
        let p = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != p) {
            return Err(Error::Data(
                "rows have differing numbers of biomarkers".into(),
            ));
        }
        let y = DMatrix::from_fn(n, p, |i, j| rows[i][j]);
        Self::new(y, doses, levels)
    }

    pub fn n(&self) -> usize {
        self.y.nrows()
    }

    pub fn p(&self) -> usize {
        self.y.ncols()
    }

    pub fn d(&self) -> usize {
        self.levels.len()
    }

    pub fn y(&self) -> &DMatrix<f64> {
        &self.y
    }

    pub fn doses(&self) -> Option<&[f64]> {
        self.doses.as_deref()
    }

    pub fn levels(&self) -> &[f64] {
        &self.levels
    }

    pub fn row(&self, i: usize) -> Vec<f64> {
        self.y.row(i).iter().copied().collect()
    }

    pub fn rows(&self) -> Vec<Vec<f64>> {
        (0..self.n()).map(|i| self.row(i)).collect()
    }

    /// Zero-based level index of each observation's dose.
    pub fn labels(&self) -> Option<Vec<usize>> {
        let x = self.doses.as_ref()?;
        Some(
            x.iter()
                .map(|&dose| {
                    self.levels
                        .iter()
                        .position(|&l| same_quantity(l, dose))
                        .expect("validated")
                })
                .collect(),
        )
    }

    /// Skip value checks; used for scaled predictors that may be negative.
    pub(crate) fn unchecked(y: DMatrix<f64>, doses: Option<Vec<f64>>, levels: Vec<f64>) -> Self {
        Dataset { y, doses, levels }
    }

    /// Same data with biomarkers replaced (e.g. after scaling). Nonnegativity
    /// is not re-checked since scaled predictors may legitimately dip below zero.
    pub fn with_biomarkers(&self, y: DMatrix<f64>) -> Self {
        assert_eq!(y.shape(), self.y.shape());
        Dataset {
            y,
            doses: self.doses.clone(),
            levels: self.levels.clone(),
        }
    }

    /// Drop the consumed quantities, keeping only biomarkers.
    pub fn biomarker_only(&self) -> Self {
        Dataset {
            y: self.y.clone(),
            doses: None,
            levels: self.levels.clone(),
        }
    }

    /// Subset of observations, in the given order.
    pub fn select(&self, idx: &[usize]) -> Self {
        let y = DMatrix::from_fn(idx.len(), self.p(), |i, j| self.y[(idx[i], j)]);
        let doses = self
            .doses
            .as_ref()
            .map(|x| idx.iter().map(|&i| x[i]).collect());
        Dataset {
            y,
            doses,
            levels: self.levels.clone(),
        }
    }

    /// Order-independent SHA-256 digest of the data (rows are sorted first).
    pub fn fingerprint(&self) -> String {
        let mut rows: Vec<Vec<u64>> = (0..self.n())
            .map(|i| {
                let mut r: Vec<u64> = self.y.row(i).iter().map(|v| v.to_bits()).collect();
                if let Some(x) = &self.doses {
                    r.push(x[i].to_bits());
                }
                r
            })
            .collect();
        rows.sort_unstable();
        let mut h = Sha256::new();
        h.update((self.p() as u64).to_le_bytes());
        h.update([u8::from(self.doses.is_some())]);
        for l in &self.levels {
            h.update(l.to_bits().to_le_bytes());
        }
        for r in &rows {
            for v in r {
                h.update(v.to_le_bytes());
            }
        }
        hex::encode(h.finalize())
    }
}
