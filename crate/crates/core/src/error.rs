use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("kernel bandwidth is still `auto`; resolve it against training inputs first")]
    UnresolvedBandwidth,

    #[error("kernel bandwidth resolved to zero: all inputs are identical")]
    ZeroBandwidth,

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("empty input: {0}")]
    EmptyInput(&'static str),

    #[error("Gram matrix is not positive semidefinite: eigenvalue {eigenvalue:e} below -{tolerance:e}")]
    NotPositiveSemidefinite { eigenvalue: f64, tolerance: f64 },

    #[error("symmetric eigensolver did not converge after {iterations} iterations")]
    EigenNoConvergence { iterations: usize },

    #[error("degenerate fixed-point function: {0}")]
    DegenerateRoot(&'static str),

    #[error("root finding did not converge after {iterations} iterations (last bracket [{lo:e}, {hi:e}])")]
    RootNotConverged { iterations: usize, lo: f64, hi: f64 },

    #[error("no root of the fixed-point function found on the scan grid (m = {m})")]
    NoRootFound { m: f64 },

    #[error("training sets must have equal size: {left} vs {right}")]
    SizeMismatch { left: usize, right: usize },

    #[error("brute-force enumeration limited to sets of size {limit}, got {size}")]
    SizeGuard { size: usize, limit: usize },

    #[error("no uniform stability bound is known for m = {m} (requires m >= 2)")]
    StabilityUndefined { m: f64 },

    #[error("scaled RMSE undefined: maximum target {max} is not positive")]
    NonPositiveMaxTarget { max: f64 },

    #[error("need at least {needed} rows, found {found}")]
    TooFewRows { needed: usize, found: usize },

    #[error("invalid split plan: {0}")]
    InvalidSplit(String),

    #[error("csv row {row}, column {column}: {message}")]
    Csv { row: usize, column: usize, message: String },

    #[error("csv row {row} has {found} fields, expected {expected}")]
    RaggedRow { row: usize, expected: usize, found: usize },

    #[error("unsupported model file version {0}")]
    ModelVersion(u32),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// True for failures of the numerical machinery (as opposed to bad input).
    pub fn is_numeric(&self) -> bool {
        matches!(
            self,
            Error::NotPositiveSemidefinite { .. }
                | Error::EigenNoConvergence { .. }
                | Error::DegenerateRoot(_)
                | Error::RootNotConverged { .. }
                | Error::NoRootFound { .. }
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
