use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("coefficients violate Hermitian symmetry (max mismatch {max_mismatch:.3e})")]
    NotHermitian { max_mismatch: f64 },

    #[error("degenerate time-rescale prefactor A = {value:.3e}")]
    DegeneratePrefactor { value: f64 },

    #[error("step size underflow at tau = {tau}: dt = {dt:.3e}")]
    StepUnderflow { tau: f64, dt: f64 },

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("internal consistency check failed: {0}")]
    Consistency(String),

    #[error("malformed snapshot: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
