use thiserror::Error;

use crate::config::ConfigError;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(#[from] ConfigError),
    #[error("{0}")]
    Core(#[from] reslevy::Error),
    #[error("cannot write {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl CliError {
    /// 1 for configuration problems, 3 for numerical failures and
    /// unwritable outputs.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 1,
            CliError::Core(e) => match e {
                reslevy::Error::InvalidParameter { .. }
                | reslevy::Error::Configuration(_)
                | reslevy::Error::Precondition { .. }
                | reslevy::Error::Unsupported { .. } => 1,
                reslevy::Error::Domain { .. }
                | reslevy::Error::Numerical { .. }
                | reslevy::Error::Degenerate { .. } => 3,
            },
            CliError::Io { .. } => 3,
        }
    }
}
