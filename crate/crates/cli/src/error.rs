use std::fmt;

/// Failure of a CLI command, mapped onto the process exit code.
#[derive(Debug)]
pub enum CliError {
    /// Exit 2. `field` is the dotted config path, e.g. `schedule.eps`.
    Config { field: String, message: String },
    /// Exit 1. Names of the failed assertions.
    Assertion(Vec<String>),
    /// Exit 3: the computation itself failed.
    Runtime(String),
}

impl CliError {
    pub fn config(field: impl Into<String>, message: impl fmt::Display) -> Self {
        CliError::Config {
            field: field.into(),
            message: message.to_string(),
        }
    }

    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Config { .. } => 2,
            CliError::Assertion(_) => 1,
            CliError::Runtime(_) => 3,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Config { field, message } => write!(f, "config error in {field}: {message}"),
            CliError::Assertion(names) => write!(f, "assertions failed: {}", names.join(", ")),
            CliError::Runtime(m) => write!(f, "{m}"),
        }
    }
}

impl std::error::Error for CliError {}

impl From<fplab::Error> for CliError {
    fn from(e: fplab::Error) -> Self {
        CliError::Runtime(e.to_string())
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Runtime(e.to_string())
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError::Runtime(e.to_string())
    }
}

pub type CliResult<T> = Result<T, CliError>;
