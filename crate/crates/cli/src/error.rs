use msc_core::MscError;

/// Failure of a command, split by exit code.
#[derive(Debug, thiserror::Error)]
pub enum CliError {
    /// Malformed or out-of-range configuration.
    #[error("config error: {0}")]
    Config(String),
    /// Unreadable input or unwritable output.
    #[error("input error: {0}")]
    Input(String),
    /// A statistical self-check did not pass.
    #[error("self-test failed: {0}")]
    SelfTest(String),
    #[error(transparent)]
    Engine(#[from] MscError),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) | CliError::Input(_) => 2,
            CliError::SelfTest(_) => 1,
            CliError::Engine(e) => match e {
                MscError::InvalidArgument(_) | MscError::Dataset { .. } | MscError::Io { .. } => 2,
                _ => 1,
            },
        }
    }
}
