use thiserror::Error;

/// Errors shared by all modules.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("generator pool mismatch: {0} vs {1}")]
    PoolMismatch(u32, u32),
    #[error("generator index {index} outside pool of size {size}")]
    GeneratorIndex { index: usize, size: usize },
    #[error("singular body: {0}")]
    SingularBody(String),
    #[error("dimension mismatch: {0}")]
    DimMismatch(String),
    #[error("parity violation: {0}")]
    Parity(String),
    #[error("invalid input: {0}")]
    Invalid(String),
    #[error("unsupported: {0}")]
    Unsupported(String),
    #[error("quadrature did not converge: achieved error {achieved:e}, partial value {partial}")]
    Quadrature { achieved: f64, partial: String },
    #[error("divergent integral: {0}")]
    Divergence(String),
    #[error("normalization drift: {0}")]
    Normalization(String),
}

pub type Result<T> = std::result::Result<T, Error>;
