use thiserror::Error;

/// Errors produced by the toolkit.
#[derive(Debug, Error)]
pub enum Error {
    #[error("unknown operator tag `{0}`")]
    UnknownTag(String),
    #[error("coefficient order mismatch: multi-index {alpha:?} has order {found}, expected {expected}")]
    OrderMismatch {
        alpha: Vec<u32>,
        found: usize,
        expected: usize,
    },
    #[error("all coefficients are zero")]
    ZeroOperator,
    #[error("invalid operator: {0}")]
    InvalidOperator(String),
    #[error("frequency must be nonzero")]
    ZeroFrequency,
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("non-finite value in {0}")]
    NonFinite(String),
    #[error("field has nonzero mean (|mean| = {0:e}); negative-order norms require zero mean")]
    NonZeroMean(f64),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("operator is elliptic at every sampled frequency: only the zero field is A-free")]
    Elliptic,
    #[error("field is not A-free (relative residual {0:e})")]
    NotAFree(f64),
    #[error("field is not in the range of the potential at frequency {freq:?} (relative residual {residual:e})")]
    NotInRange { freq: Vec<i64>, residual: f64 },
    #[error("zero denominator: {0}")]
    ZeroDenominator(String),
    #[error("empty input: {0}")]
    Empty(String),
    #[error("time window [{start}, {end}] outside trajectory span (0, {span})")]
    OutsideSpan { start: f64, end: f64, span: f64 },
    #[error("unknown system tag `{0}`")]
    UnknownSystem(String),
    #[error("step size violates the stability bound (ratio {0:.3} > 1)")]
    Cfl(f64),
    #[error("malformed field file: {0}")]
    Format(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
