use thiserror::Error;

use ccdd_core::Error as CoreError;

#[derive(Debug, Error)]
pub enum CliError {
    /// Unreadable or schema-invalid configuration.
    #[error("config error: {0}")]
    Schema(String),
    /// Parameters that parse but describe an impossible experiment.
    #[error("physics validation failed: {0}")]
    Physics(CoreError),
    #[error("{0}")]
    Runtime(String),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Schema(_) => 2,
            CliError::Physics(_) => 3,
            CliError::Runtime(_) | CliError::Io(_) => 1,
        }
    }
}

impl From<CoreError> for CliError {
    fn from(e: CoreError) -> Self {
        match e {
            CoreError::EpsilonNotBelowOmega { .. }
            | CoreError::ModulationMismatch { .. }
            | CoreError::InvalidParameter { .. }
            | CoreError::UnsupportedBranch(_)
            | CoreError::Timing(_)
            | CoreError::Nyquist { .. }
            | CoreError::GridViolation { .. }
            | CoreError::AboveNyquist { .. } => CliError::Physics(e),
            other => CliError::Runtime(other.to_string()),
        }
    }
}
