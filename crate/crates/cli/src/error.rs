use std::fmt;

/// Failure of a command, carrying the process exit status it maps to.
#[derive(Debug)]
pub enum CliError {
    /// Bad arguments or unreadable / malformed input (exit 2).
    Usage(String),
    /// Input parsed but the model or data is unusable (exit 1).
    Domain(Vec<String>),
}

impl CliError {
    pub fn usage(msg: impl Into<String>) -> Self {
        CliError::Usage(msg.into())
    }

    pub fn domain(msg: impl Into<String>) -> Self {
        CliError::Domain(vec![msg.into()])
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Domain(_) => 1,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(msg) => write!(f, "{msg}"),
            CliError::Domain(lines) => write!(f, "{}", lines.join("\n")),
        }
    }
}

impl std::error::Error for CliError {}

impl From<dnm_core::Error> for CliError {
    fn from(e: dnm_core::Error) -> Self {
        match e {
            dnm_core::Error::InvalidSpec(vs) => {
                CliError::Domain(vs.iter().map(ToString::to_string).collect())
            }
            dnm_core::Error::InvalidNetwork(vs) => {
                CliError::Domain(vs.iter().map(ToString::to_string).collect())
            }
            other => CliError::domain(other.to_string()),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::domain(format!("i/o error: {e}"))
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        CliError::domain(format!("csv error: {e}"))
    }
}

pub type CliResult<T> = Result<T, CliError>;
