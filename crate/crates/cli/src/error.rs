use thiserror::Error;

/// Failures that end a command, each with a fixed exit code.
#[derive(Debug, Error)]
pub enum CliError {
    #[error("usage: {0}")]
    Usage(String),
    #[error("data format: {0}")]
    Data(String),
    #[error("invariant violated: {0}")]
    Invariant(String),
    #[error("numeric failure in {stage}: {msg}")]
    Numeric { stage: String, msg: String },
    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),
}

impl CliError {
    pub fn numeric(stage: &str, msg: impl ToString) -> Self {
        CliError::Numeric {
            stage: stage.to_string(),
            msg: msg.to_string(),
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 64,
            CliError::Data(_) => 65,
            CliError::Invariant(_) => 2,
            CliError::Numeric { .. } | CliError::Io(_) => 3,
        }
    }
}
