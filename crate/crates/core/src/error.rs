use thiserror::Error;

/// Errors produced anywhere in the library.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("grid size N = {0} is odd; an even N is required")]
    OddN(usize),
    #[error("grid size N = {0} is too small; N >= 8 is required")]
    TooFewPoints(usize),
    #[error("domain length must be positive and finite, got {0}")]
    InvalidLength(f64),
    #[error("derivative order must be at least 1")]
    InvalidDerivativeOrder,
    #[error("field has {got} values but the grid has {expected} nodes")]
    LengthMismatch { expected: usize, got: usize },
    #[error("fields live on different grids")]
    GridMismatch,
    #[error("field contains a non-finite value at node {0}")]
    NonFinite(usize),
    #[error("non-positive density value {value} at node {index}")]
    NonPositiveDensity { index: usize, value: f64 },
    #[error("invalid solver configuration: {0}")]
    InvalidConfig(String),
    #[error("Jacobian is singular (pivot {pivot} at row {row})")]
    SingularJacobian { row: usize, pivot: f64 },
    #[error("Newton did not converge at step {step}: {iterations} iterations, residual {residual:e}")]
    NoConvergence {
        step: usize,
        iterations: usize,
        residual: f64,
    },
    #[error("quotient denominator {0:e} is degenerate")]
    DegenerateDenominator(f64),
    #[error("invalid quotient specification: {0}")]
    InvalidQuotient(String),
    #[error("positivity lost along the flow at t = {t} (min value {min:e})")]
    PositivityLost { t: f64, min: f64 },
    #[error("insufficient data for fit: {got} samples, at least {need} required")]
    InsufficientData { got: usize, need: usize },
    #[error("non-positive entropy {value:e} at t = {t} inside the fit window")]
    NonPositiveEntropy { t: f64, value: f64 },
    #[error("parse error at line {line}: {reason}")]
    Parse { line: usize, reason: String },
    #[error("invalid value for `{field}`: {reason}")]
    Validation { field: String, reason: String },
    #[error("i/o error: {0}")]
    Io(String),
}

impl Error {
    /// Whether the error stems from user input rather than a numerical failure.
    pub fn is_validation(&self) -> bool {
        matches!(
            self,
            Error::OddN(_)
                | Error::TooFewPoints(_)
                | Error::InvalidLength(_)
                | Error::InvalidDerivativeOrder
                | Error::LengthMismatch { .. }
                | Error::GridMismatch
                | Error::InvalidConfig(_)
                | Error::InvalidQuotient(_)
                | Error::Parse { .. }
                | Error::Validation { .. }
        )
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
