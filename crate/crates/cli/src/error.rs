use thiserror::Error;

/// Operational failures; all map to exit status 1.
#[derive(Debug, Error)]
pub enum CliError {
    #[error("line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("{0}")]
    Schema(String),
    #[error("{0}")]
    Model(String),
    #[error("{path}: {message}")]
    Io { path: String, message: String },
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Core(#[from] rlp_core::Error),
}

impl CliError {
    pub fn code(&self) -> &'static str {
        match self {
            CliError::Parse { .. } => "parse_error",
            CliError::Schema(_) => "schema_error",
            CliError::Model(_) => "model_error",
            CliError::Io { .. } => "io_error",
            CliError::Usage(_) => "usage_error",
            CliError::Core(e) => e.code(),
        }
    }
}
