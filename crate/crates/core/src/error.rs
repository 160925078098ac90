use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("scenario is not canonical; call `canonicalize` first")]
    NotCanonical,

    #[error("scenario is already canonical")]
    AlreadyCanonical,

    #[error("singular probe preparation: |r| = {r} is within 1e-9 of 1")]
    SingularPreparation { r: f64 },

    #[error("under-resolved grid: {0}")]
    Resolution(String),

    #[error("representation mismatch: {0}")]
    Representation(String),

    #[error("calibration failure: {0}")]
    Calibration(String),

    #[error("conditional state undefined: outcome {outcome} has probability {probability:e}")]
    UndefinedConditional { outcome: usize, probability: f64 },

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("operator is not unitary (deviation {deviation:e})")]
    NonUnitary { deviation: f64 },

    #[error("invalid state: {0}")]
    InvalidState(String),
}

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidArgument(msg.into())
}
