use thiserror::Error;

/// Failure classes, each with its own process exit code.
#[derive(Debug, Error)]
pub enum CliError {
    /// Bad input file, spec or configuration.
    #[error("{0:#}")]
    Input(anyhow::Error),
    /// Network or remote-node failure.
    #[error("{0:#}")]
    Remote(anyhow::Error),
    #[error("{0:#}")]
    Internal(anyhow::Error),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Internal(_) => 1,
            CliError::Input(_) => 2,
            CliError::Remote(_) => 3,
        }
    }

    pub fn input(e: impl Into<anyhow::Error>) -> Self {
        CliError::Input(e.into())
    }

    pub fn internal(e: impl Into<anyhow::Error>) -> Self {
        CliError::Internal(e.into())
    }

    /// Prefixes the message, keeping the class.
    pub fn context(self, what: impl std::fmt::Display) -> Self {
        match self {
            CliError::Input(e) => CliError::Input(e.context(what.to_string())),
            CliError::Remote(e) => CliError::Remote(e.context(what.to_string())),
            CliError::Internal(e) => CliError::Internal(e.context(what.to_string())),
        }
    }
}

pub type CliResult<T> = Result<T, CliError>;
