use thiserror::Error;

use crate::integrate::IntegrateError;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// One entry per violated bound, e.g. `"kappa > 0"`.
    #[error("invalid parameters: {}", .0.join(", "))]
    InvalidParams(Vec<String>),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("{scheme} requires n_dots = {required}, got {actual}")]
    SchemeMismatch {
        scheme: String,
        required: u32,
        actual: u32,
    },

    #[error("{0}")]
    Singular(String),

    #[error(transparent)]
    Integrate(#[from] IntegrateError),

    #[error("Hilbert space dimension {dim} exceeds cap {cap}")]
    DimensionCap { dim: usize, cap: usize },

    #[error("n_max too small: {0}")]
    Truncation(String),

    #[error("cutoff search did not converge: {0}")]
    CutoffNotConverged(String),
}
