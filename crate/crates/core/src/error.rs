use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    /// Kinetic energy fell to or below the floor; the Jacobi metric is
    /// degenerate there.
    #[error("kinetic energy {min_kinetic:e} at t = {t} is at or below the floor {floor:e}")]
    SingularKineticEnergy { t: f64, min_kinetic: f64, floor: f64 },

    #[error("non-finite spread state at t = {t}")]
    NonFiniteState { t: f64 },

    #[error("cannot renormalize a zero-norm spread state")]
    ZeroNormState,

    #[error("series has {len} entries, need at least {min}")]
    InsufficientSeries { len: usize, min: usize },

    #[error("i/o error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(err: std::io::Error) -> Self {
        Error::Io(err.to_string())
    }
}

pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidParameter {
        name,
        reason: reason.into(),
    }
}
