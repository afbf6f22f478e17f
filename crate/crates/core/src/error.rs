use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("direction is not a unit vector (norm {norm})")]
    InvalidDirection { norm: f64 },
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimMismatch { expected: usize, found: usize },
    #[error("measure has no atoms")]
    EmptyMeasure,
    #[error("invalid weights: {0}")]
    InvalidWeights(String),
    #[error("non-finite coordinate or value")]
    NonFinite,
    #[error("invalid exponent {0}: must be >= 1")]
    InvalidExponent(f64),
    #[error("quantile level {0} outside (0, 1)")]
    InvalidQuantile(f64),
    #[error("invalid parameter: {0}")]
    InvalidParam(String),
    #[error("{what} has size {size}, above the cap of {cap}")]
    TooLarge { what: &'static str, size: usize, cap: usize },
    #[error("grid is empty")]
    EmptyGrid,
    #[error("direction set is empty")]
    EmptySet,
    #[error("circle grid size {0} must be a positive multiple of 8")]
    InvalidGrid(usize),
    #[error("negative value {0} cannot be aggregated")]
    InvalidValue(f64),
    #[error("duality requires p <= q (got p = {p}, q = {q})")]
    HypothesisViolated { p: f64, q: String },
    #[error("all values are zero")]
    DegenerateInput,
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("grid oracle supports only support_size = 1 and dim <= 3: {0}")]
    UnsupportedOracle(String),
    #[error("objective increased on {checks} consecutive checks (iteration {iteration})")]
    StepTooLarge { iteration: usize, checks: usize },
    #[error("solver did not converge: {0}")]
    NoConvergence(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn check_exponent(p: f64) -> Result<()> {
    if p.is_finite() && p >= 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidExponent(p))
    }
}
