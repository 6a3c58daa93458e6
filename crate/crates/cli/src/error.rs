//! Driver-level errors with process exit codes: 1 for anything the user can
//! fix (config, I/O, model validation), 2 for numerical failures inside a
//! run.

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("config: {0}")]
    Config(String),
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("serialization: {0}")]
    Serde(String),
    #[error(transparent)]
    Core(#[from] spinlab_core::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) | CliError::Io { .. } | CliError::Serde(_) => 1,
            CliError::Core(e) => {
                if e.is_validation() {
                    1
                } else {
                    2
                }
            }
        }
    }
}

pub type Result<T> = std::result::Result<T, CliError>;
