use std::fmt;

use thiserror::Error;

/// A single problem found while validating a [`Dataset`](crate::model::Dataset).
#[derive(Debug, Clone, PartialEq)]
pub enum Violation {
    NegativeBiomarker {
        row: usize,
        col: usize,
        value: f64,
    },
    NonFiniteBiomarker {
        row: usize,
        col: usize,
    },
    LevelsNotIncreasing {
        index: usize,
        prev: f64,
        next: f64,
    },
    DoseNotInLevels {
        row: usize,
        dose: f64,
    },
    ShapeMismatch {
        what: &'static str,
        expected: usize,
        found: usize,
    },
    Empty,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::NegativeBiomarker { row, col, value } => {
                write!(f, "negative biomarker value {value} at row {row}, column {col}")
            }
            Violation::NonFiniteBiomarker { row, col } => {
                write!(f, "non-finite biomarker value at row {row}, column {col}")
            }
            Violation::LevelsNotIncreasing { index, prev, next } => write!(
                f,
                "food-quantity levels not strictly increasing at position {index} ({prev} then {next})"
            ),
            Violation::DoseNotInLevels { row, dose } => {
                write!(f, "dose {dose} at row {row} is not one of the food-quantity levels")
            }
            Violation::ShapeMismatch { what, expected, found } => {
                write!(f, "{what}: expected {expected}, found {found}")
            }
            Violation::Empty => write!(f, "dataset has no observations or no biomarkers"),
        }
    }
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("degenerate truncation interval: mean {mean}, variance {variance}, bounds [{lower}, {upper}] carry no probability mass")]
    DegenerateInterval {
        mean: f64,
        variance: f64,
        lower: f64,
        upper: f64,
    },

    #[error("invalid dataset: {}", join(.0))]
    InvalidDataset(Vec<Violation>),

    #[error("biomarker column {0} is constant and cannot be standardized")]
    DegenerateColumn(usize),

    #[error("{0}")]
    Usage(String),

    #[error("rank deficiency: {0}")]
    Rank(String),

    #[error("dimension mismatch: {what} (expected {expected}, found {found})")]
    Dimension {
        what: &'static str,
        expected: usize,
        found: usize,
    },

    #[error("data error: {0}")]
    Data(String),

    #[error("biomarkers carry no information about intake (all slopes are zero)")]
    DegenerateInformation,

    #[error("fingerprint mismatch: {0}")]
    Mismatch(String),

    #[error("malformed file: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

fn join(v: &[Violation]) -> String {
    v.iter()
        .map(|x| x.to_string())
        .collect::<Vec<_>>()
        .join("; ")
}

impl Error {
    /// Stable machine-readable category, used for CLI exit reporting.
    pub fn category(&self) -> &'static str {
        match self {
            Error::Parameter(_) | Error::DegenerateInterval { .. } => "parameter",
            Error::InvalidDataset(_) | Error::DegenerateColumn(_) | Error::Data(_) => "data",
            Error::Usage(_) => "usage",
            Error::Rank(_) | Error::DegenerateInformation => "numeric",
            Error::Dimension { .. } => "dimension",
            Error::Mismatch(_) => "mismatch",
            Error::Format(_) | Error::Json(_) | Error::Csv(_) => "format",
            Error::Io(_) => "io",
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
