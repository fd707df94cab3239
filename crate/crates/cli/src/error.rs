use std::fmt;
use std::process::ExitCode;

/// CLI failure, split by who has to act on it.
#[derive(Debug)]
pub enum CliError {
    /// Bad parameters, violated preconditions, malformed manifests. Exit 2.
    User(String),
    /// Anything else. Exit 1.
    Internal(String),
}

impl CliError {
    pub fn exit_code(&self) -> ExitCode {
        match self {
            CliError::User(_) => ExitCode::from(2),
            CliError::Internal(_) => ExitCode::from(1),
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::User(m) | CliError::Internal(m) => f.write_str(m),
        }
    }
}

impl From<rsmooth_core::Error> for CliError {
    fn from(e: rsmooth_core::Error) -> Self {
        if e.is_user_facing() {
            CliError::User(e.to_string())
        } else {
            CliError::Internal(e.to_string())
        }
    }
}
