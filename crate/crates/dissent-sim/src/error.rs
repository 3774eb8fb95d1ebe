use dissent_core::SimError;
use thiserror::Error;

/// Failure of a CLI invocation, grouped by exit code.
#[derive(Debug, Error)]
pub enum CliError {
    /// Invalid input: bad flag values, unknown config keys, violated preconditions.
    #[error("{0}")]
    Domain(String),
    /// A computation failed to converge.
    #[error("{0}")]
    Numerical(String),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

impl CliError {
    pub fn domain(msg: impl Into<String>) -> Self {
        CliError::Domain(msg.into())
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Domain(_) => 2,
            CliError::Numerical(_) => 3,
            CliError::Io(_) => 1,
        }
    }
}

impl From<SimError> for CliError {
    fn from(e: SimError) -> Self {
        if e.is_domain() {
            CliError::Domain(e.to_string())
        } else {
            CliError::Numerical(e.to_string())
        }
    }
}

pub type CliResult<T> = Result<T, CliError>;
