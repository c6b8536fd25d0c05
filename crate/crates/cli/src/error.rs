use std::fmt;

use supou::{ErrorCategory, SupouError};

#[derive(Debug)]
pub enum CliError {
    /// Malformed document or unknown key.
    Schema(String),
    /// A value violates a model invariant.
    Validation(String),
    Core(SupouError),
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Schema(_) | CliError::Validation(_) => 2,
            CliError::Core(e) => match e.category() {
                ErrorCategory::Validation => 2,
                ErrorCategory::Numerical => 3,
                ErrorCategory::Precondition => 4,
            },
            CliError::Io(_) => 3,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            CliError::Schema(_) => "schema",
            CliError::Validation(_) => "validation",
            CliError::Core(e) => match e.category() {
                ErrorCategory::Validation => "validation",
                ErrorCategory::Numerical => "numerical",
                ErrorCategory::Precondition => "precondition",
            },
            CliError::Io(_) => "io",
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Schema(m) | CliError::Validation(m) | CliError::Io(m) => f.write_str(m),
            CliError::Core(e) => write!(f, "{e}"),
        }
    }
}

impl std::error::Error for CliError {}

impl From<SupouError> for CliError {
    fn from(e: SupouError) -> Self {
        CliError::Core(e)
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e.to_string())
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        CliError::Io(e.to_string())
    }
}
