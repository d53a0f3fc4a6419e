use thiserror::Error;

use crate::field::DomainTag;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("matrix is singular: |det| = {det:e} is below the threshold {eps:e}")]
    SingularMatrix { det: f64, eps: f64 },

    #[error("first column of the K0 x H decomposition is degenerate (b^2 + d^2 = {0:e})")]
    DegenerateColumn(f64),

    #[error("frequency vector is zero (|omega|^2 = {0:e})")]
    ZeroFrequency(f64),

    #[error("dilation parameter is singular: |a| = {0:e}")]
    SingularDilation(f64),

    #[error("domain tag mismatch: expected {expected}, found {found}")]
    TagMismatch { expected: DomainTag, found: DomainTag },

    #[error("admissibility weight requires a FREQ3 field, found {0}")]
    WeightDomainMismatch(DomainTag),

    #[error("no closed-form third-axis transform: {0}")]
    NoClosedForm(String),

    #[error("{which} normalization integral is {value}, expected 1 within {tol:e}")]
    NormalizationError { which: &'static str, value: f64, tol: f64 },

    #[error("integral does not converge under refinement: {coarse} -> {refined}")]
    NonConvergent { coarse: f64, refined: f64 },

    #[error("field has zero norm")]
    ZeroField,

    #[error("quadrature has no nodes")]
    EmptyQuadrature,

    #[error("invalid specification: {0}")]
    InvalidSpec(String),

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("malformed file: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
