use thiserror::Error;

/// Errors raised by the identifiability analyses.
#[derive(Debug, Error)]
pub enum Error {
    #[error("parameter {index} = {value} outside admissible interval [{lower}, {upper}]")]
    OutOfBounds {
        index: usize,
        value: f64,
        lower: f64,
        upper: f64,
    },
    #[error("ordering constraint theta[{greater}] > theta[{lesser}] violated")]
    OrderingViolated { greater: usize, lesser: usize },
    #[error("dimension mismatch in {what}: expected {expected}, got {got}")]
    Dimension {
        what: &'static str,
        expected: usize,
        got: usize,
    },
    #[error("non-finite model output at t = {t}")]
    NonFinite { t: f64 },
    #[error("invalid design: {0}")]
    InvalidDesign(String),
    #[error("invalid parameter space: {0}")]
    InvalidSpace(String),
    #[error("model not found: {0}")]
    ModelNotFound(String),
    #[error("integrator failure: {0}")]
    Integrator(String),
    #[error("model `{0}` does not expose right-hand-side partial derivatives")]
    MissingPartials(String),
    #[error("unidentifiable design: X^T X is singular along null-space direction {direction:?}")]
    UnidentifiableDesign { direction: Vec<f64> },
    #[error("information matrix is rank-deficient")]
    RankDeficient,
    #[error("zero or negative eigenvalue present; sloppiness is undefined")]
    ZeroEigenvalue,
    #[error("non-finite entry in {0}")]
    NonFiniteInput(&'static str),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
