use aet_core::AetError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config: {0}")]
    Config(String),

    #[error("input: {0}")]
    Input(String),

    #[error(transparent)]
    Numeric(AetError),
}

impl CliError {
    /// 2 for configuration and input problems, 3 for numerical failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) | CliError::Input(_) => 2,
            CliError::Numeric(_) => 3,
        }
    }
}

impl From<AetError> for CliError {
    fn from(e: AetError) -> Self {
        match e {
            AetError::Io(e) => CliError::Input(e.to_string()),
            AetError::Format(m) => CliError::Input(format!("malformed file: {m}")),
            AetError::GridMismatch(m) => CliError::Input(format!("grid mismatch: {m}")),
            other => CliError::Numeric(other),
        }
    }
}
