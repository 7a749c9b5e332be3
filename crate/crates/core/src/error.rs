use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// Coarse error classes, used by the command-line front end to pick an
/// exit code.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorCategory {
    Input,
    Degenerate,
    Numerical,
    Io,
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("need at least {min} observations, got {got}")]
    TooShort { min: usize, got: usize },
    #[error("non-finite value at position {index}")]
    NonFinite { index: usize },
    #[error("value at position {index} is not strictly positive ({value}); enable shift-to-positive to proceed")]
    NonPositive { index: usize, value: f64 },
    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("degenerate input: {0}")]
    Degenerate(String),
    #[error("curves are defined on different knot grids ({left} vs {right} segments)")]
    GridMismatch { left: usize, right: usize },
    #[error("upper curve lies below lower curve at knot {knot} by {gap}")]
    CurveOrder { knot: usize, gap: f64 },
    #[error("empty input: {0}")]
    Empty(String),
    #[error("singular correlation matrix: eigenvalue {eigenvalue:e} below threshold along direction {direction:?}")]
    Singular { eigenvalue: f64, direction: Vec<f64> },
    #[error("design matrix is rank deficient (condition {condition:e})")]
    RankDeficient { condition: f64 },
    #[error("training diverged: non-finite loss at iteration {iteration}")]
    NonFiniteLoss { iteration: usize },
    #[error("row {row}, column '{column}': {message}")]
    Data { row: usize, column: String, message: String },
    #[error("unknown column '{0}'")]
    UnknownColumn(String),
    #[error("orthogonality residual {residual:e} exceeds tolerance {tolerance:e}; f_d is not the projection")]
    NotProjection { residual: f64, tolerance: f64 },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn category(&self) -> ErrorCategory {
        match self {
            Error::Degenerate(_) | Error::Singular { .. } | Error::RankDeficient { .. } => {
                ErrorCategory::Degenerate
            }
            Error::NonFiniteLoss { .. } | Error::NotProjection { .. } => ErrorCategory::Numerical,
            Error::Io(_) => ErrorCategory::Io,
            _ => ErrorCategory::Input,
        }
    }
}
