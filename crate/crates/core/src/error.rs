use crate::spectral::Field;
use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// A scalar parameter lies outside its admissible range.
    #[error("invalid parameter `{name}`: {reason}")]
    Parameter { name: &'static str, reason: String },

    /// Dilation exponent exceeds the resolvable range.
    #[error("dilation |tau| = {tau} exceeds tau_max = {tau_max}")]
    Range { tau: f64, tau_max: f64 },

    #[error("degenerate input: {0}")]
    Degenerate(&'static str),

    #[error("fields live on different grids")]
    GridMismatch,

    #[error("usage error: {0}")]
    Usage(String),

    #[error("infeasible: {0}")]
    Infeasible(String),

    #[error("resolution error: {0}")]
    Resolution(String),

    #[error("non-finite energy after {iterations} iterations")]
    NumericalFailure {
        iterations: usize,
        last_valid: Box<Field>,
    },

    #[error("configuration error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn parameter(name: &'static str, reason: impl Into<String>) -> Self {
        Error::Parameter {
            name,
            reason: reason.into(),
        }
    }
}
