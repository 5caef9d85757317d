use std::io::ErrorKind;
use std::path::PathBuf;

use affectline_core::Error as CoreError;

pub const EXIT_FAILURE: i32 = 1;
pub const EXIT_MISSING: i32 = 2;
pub const EXIT_CONFIG: i32 = 3;

#[derive(Debug)]
pub enum CliError {
    /// A required upstream artifact does not exist.
    Missing(PathBuf),
    Config(String),
    Other(anyhow::Error),
}

pub type CliResult<T> = Result<T, CliError>;

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Missing(_) => EXIT_MISSING,
            CliError::Config(_) => EXIT_CONFIG,
            CliError::Other(_) => EXIT_FAILURE,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Missing(p) => write!(f, "missing input: {}", p.display()),
            CliError::Config(m) => write!(f, "invalid configuration: {m}"),
            CliError::Other(e) => write!(f, "{e:#}"),
        }
    }
}

impl From<CoreError> for CliError {
    fn from(e: CoreError) -> Self {
        match e {
            CoreError::Unreadable { path, source } if source.kind() == ErrorKind::NotFound => CliError::Missing(path),
            CoreError::Config(m) => CliError::Config(m),
            other => CliError::Other(other.into()),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Other(e.into())
    }
}

impl From<anyhow::Error> for CliError {
    fn from(e: anyhow::Error) -> Self {
        CliError::Other(e)
    }
}

pub fn config_err(msg: impl Into<String>) -> CliError {
    CliError::Config(msg.into())
}
