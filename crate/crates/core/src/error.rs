use thiserror::Error;

/// Errors produced by the flow, geometry and model layers.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error(
        "matrix is not Hermitian: max |A - A^dagger| = {deviation:e} exceeds tolerance {tol:e}"
    )]
    NotHermitian { deviation: f64, tol: f64 },
    #[error("matrix is not anti-Hermitian: max |A + A^dagger| = {deviation:e}")]
    NotAntiHermitian { deviation: f64 },
    #[error("non-finite entry encountered in {context}")]
    NonFinite { context: &'static str },
    #[error("dimension mismatch: {left} vs {right}")]
    DimMismatch { left: usize, right: usize },
    #[error("matrix is not square: {rows}x{cols}")]
    NotSquare { rows: usize, cols: usize },
    #[error("band index {index} is out of range for dimension {dim}")]
    IndexOverflow { index: usize, dim: usize },
    #[error("no band with off-diagonality {index} is present")]
    NoSuchBand { index: usize },
    #[error("integrator failure at l = {l}: {reason}")]
    IntegratorFailure { l: f64, reason: String },
    #[error("unitarity drift {drift:e} exceeds 1e-6 at l = {l} (step too large)")]
    UnitarityDrift { l: f64, drift: f64 },
    #[error("need at least {needed} samples, got {got}")]
    TooFewSamples { needed: usize, got: usize },
    #[error("metric routes disagree: relative deviation {deviation:e} at alpha = {alpha:?}")]
    RouteMismatch { deviation: f64, alpha: Vec<f64> },
    #[error("family is not unitary at alpha = {alpha:?}: max |U^dagger U - I| = {deviation:e}")]
    NonUnitaryFamily { deviation: f64, alpha: Vec<f64> },
    #[error("metric is degenerate at alpha = {alpha:?} (min eigenvalue {min_eigenvalue:e})")]
    DegenerateMetric {
        min_eigenvalue: f64,
        alpha: Vec<f64>,
    },
    #[error("curve is stationary: ds/dl is below threshold over the whole trajectory")]
    StationaryCurve,
    #[error("condition on band multiples is violated for i_a = {index}: band {offender} = {multiple} x {index} is present")]
    ConditionViolated {
        index: usize,
        offender: usize,
        multiple: usize,
    },
    #[error("model specification violated: {0}")]
    SpecViolation(String),
    #[error("displacement shift is singular: omega^2 = 4|lambda|^2")]
    SingularShift,
    #[error("coordinate {alpha:?} is outside the domain of family {family}")]
    CoordinateOutOfDomain { family: String, alpha: Vec<f64> },
    #[error("truncation too small: n_max = {n_max}, need at least {needed}")]
    TruncationTooSmall { n_max: usize, needed: usize },
    #[error("unitary is not in family {family}: reconstruction residual {residual:e} at l = {l}")]
    NotInFamily {
        family: String,
        residual: f64,
        l: f64,
    },
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("i/o error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::InvalidInput(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
