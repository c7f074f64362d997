use num_complex::Complex64;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("configuration error: {0}")]
    Config(String),

    /// `exp(g)` is not representable; `exponent` is still exact.
    #[error("overlap out of range: exp({exponent}) overflows")]
    Range { exponent: Complex64 },

    #[error("solver failure: {message} (residual {residual:.3e})")]
    Solver { message: String, residual: f64 },

    #[error("near-degenerate reference level: |gap| = {gap:.3e} to level {index}")]
    Degenerate { index: usize, gap: f64 },

    #[error("dimension {dim} exceeds limit {limit}")]
    Dimension { dim: usize, limit: usize },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn config<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Config(msg.into()))
}
