use std::fmt;

/// Failure of a command, split by exit code.
#[derive(Debug)]
pub enum CliError {
    /// Bad flags, config or input data (exit 2).
    Usage(String),
    /// Anything else, such as failing to write an output (exit 1).
    Internal(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Internal(_) => 1,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(m) | CliError::Internal(m) => f.write_str(m),
        }
    }
}

/// Library errors come from the inputs: a violated contract, a malformed
/// file or one that cannot be read.
impl From<painformer::Error> for CliError {
    fn from(e: painformer::Error) -> Self {
        CliError::Usage(e.to_string())
    }
}

pub type CliResult<T> = Result<T, CliError>;

/// Tags an output-side failure as internal.
pub fn output<T, E: fmt::Display>(what: &std::path::Path, r: Result<T, E>) -> CliResult<T> {
    r.map_err(|e| CliError::Internal(format!("writing {}: {e}", what.display())))
}
