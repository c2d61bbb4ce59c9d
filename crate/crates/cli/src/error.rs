use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    /// Unreadable or invalid configuration; exit code 2.
    #[error("configuration error: {0}")]
    Config(String),

    /// A numerical step failed; exit code 1.
    #[error("{0}")]
    Numeric(#[from] jumptail::Error),

    #[error("cannot write {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Numeric(jumptail::Error::Config(_)) => 2,
            CliError::Numeric(_) | CliError::Io { .. } => 1,
        }
    }
}
