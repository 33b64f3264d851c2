use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// Every failure the library can report.
///
/// [`Error::code`] gives a stable upper-case identifier that the command
/// line front end prints and that tests can match on.
#[derive(Debug, Error)]
pub enum Error {
    #[error("malformed header: {0}")]
    MalformedHeader(String),

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("line {line}: cannot parse {token:?} as a number")]
    Parse { line: usize, token: String },

    #[error("non-finite value at row {row}, column {col}")]
    NonFiniteValue { row: usize, col: usize },

    #[error("cannot open {path}: {source}")]
    Open {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("i/o failure: {0}")]
    Io(#[from] std::io::Error),

    #[error("index {index} out of range for {n} rows")]
    IndexOutOfRange { index: usize, n: usize },

    #[error("empty selection")]
    EmptySelection,

    #[error("reference objective must be positive, got {0}")]
    NonPositiveReference(f64),

    #[error("k = {k} exceeds the {available} rows available without replacement")]
    KTooLarge { k: usize, available: usize },

    #[error("k must be at least 1")]
    ZeroK,

    #[error("operation requires group labels")]
    MissingLabels,

    #[error("group {label} has {size} rows but a quota of {quota}")]
    GroupSmallerThanQuota { label: u32, size: usize, quota: usize },

    #[error("psi = {0} outside [0, 0.5)")]
    PsiOutOfRange(f64),

    #[error("covariance is not symmetric positive definite")]
    CovNotSpd,

    #[error("corrupt rows ({corrupt}) are not a strict minority of clean rows ({clean})")]
    MajorityCorrupt { clean: usize, corrupt: usize },

    #[error("operation requires clean/corrupt flags")]
    MissingFlags,

    #[error("errors must be positive for a log-log fit, got {0}")]
    NonPositiveError(f64),

    #[error("need at least 3 points for a slope fit, got {0}")]
    TooFewPoints(usize),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
}

impl Error {
    pub fn code(&self) -> &'static str {
        match self {
            Error::MalformedHeader(_) => "MALFORMED_HEADER",
            Error::DimensionMismatch { .. } => "DIMENSION_MISMATCH",
            Error::Parse { .. } => "PARSE_ERROR",
            Error::NonFiniteValue { .. } => "NON_FINITE_VALUE",
            Error::Open { .. } | Error::Io(_) => "IO_FAILURE",
            Error::IndexOutOfRange { .. } => "INDEX_OUT_OF_RANGE",
            Error::EmptySelection => "EMPTY_SELECTION",
            Error::NonPositiveReference(_) => "NON_POSITIVE_REFERENCE",
            Error::KTooLarge { .. } | Error::ZeroK => "K_TOO_LARGE",
            Error::MissingLabels => "MISSING_LABELS",
            Error::GroupSmallerThanQuota { .. } => "GROUP_SMALLER_THAN_QUOTA",
            Error::PsiOutOfRange(_) => "PSI_OUT_OF_RANGE",
            Error::CovNotSpd => "COV_NOT_SPD",
            Error::MajorityCorrupt { .. } => "MAJORITY_CORRUPT",
            Error::MissingFlags => "MISSING_FLAGS",
            Error::NonPositiveError(_) => "NON_POSITIVE_ERROR",
            Error::TooFewPoints(_) => "TOO_FEW_POINTS",
            Error::InvalidConfig(_) => "INVALID_CONFIG",
        }
    }
}

pub(crate) fn check_dim(expected: usize, found: usize) -> Result<()> {
    if expected != found {
        return Err(Error::DimensionMismatch { expected, found });
    }
    Ok(())
}
