use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ParseRatError {
    #[error("empty rational literal")]
    Empty,
    #[error("malformed rational literal {0:?}")]
    Malformed(String),
    #[error("zero denominator")]
    ZeroDenominator,
    #[error("decimal exponent out of range")]
    ExponentTooLarge,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum GeomError {
    #[error("dimension {dim} exceeds the supported maximum of {max}")]
    DimensionTooLarge { dim: usize, max: usize },
    #[error("representation has no rows or generators: {0}")]
    EmptyInput(&'static str),
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("inequality row {0} has an all-zero normal")]
    ZeroNormal(usize),
    #[error("ray {0} is the zero vector")]
    ZeroRay(usize),
    #[error("dimension must be at least 1")]
    ZeroDimension,
    #[error("scaling factor must be strictly positive")]
    NonPositiveScale,
    #[error("invalid polyhedron json: {0}")]
    Json(String),
    #[error(transparent)]
    Rat(#[from] ParseRatError),
}
