use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config: {0}")]
    Config(String),

    #[error("{0}")]
    Usage(String),

    #[error(transparent)]
    Core(#[from] qnd_core::Error),

    #[error("tolerance exceeded: {0}")]
    Tolerance(String),

    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),
}

impl CliError {
    /// 1 for bad input, 2 for numerical or tolerance failures.
    pub fn exit_code(&self) -> u8 {
        use qnd_core::Error as E;
        match self {
            CliError::Config(_) | CliError::Usage(_) | CliError::Io(_) => 1,
            CliError::Tolerance(_) => 2,
            CliError::Core(e) => match e {
                E::InvalidArgument(_)
                | E::NotCanonical
                | E::AlreadyCanonical
                | E::SingularPreparation { .. }
                | E::DimensionMismatch(_)
                | E::InvalidState(_) => 1,
                E::Resolution(_)
                | E::Representation(_)
                | E::Calibration(_)
                | E::UndefinedConditional { .. }
                | E::NonUnitary { .. } => 2,
            },
        }
    }
}
