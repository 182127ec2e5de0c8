use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config: {0}")]
    Config(String),
    #[error("cannot write to {path}: {source}")]
    Output {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("cannot read {path}: {source}")]
    Input {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Core(#[from] hesim::Error),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

impl CliError {
    /// 2 for anything the user can fix in the configuration, 3 when a run
    /// ran out of levels (a guard bug), 1 otherwise.
    pub fn exit_code(&self) -> i32 {
        use hesim::Error as E;
        match self {
            CliError::Config(_) | CliError::Output { .. } | CliError::Input { .. } => 2,
            CliError::Core(E::LevelExhausted(_)) => 3,
            CliError::Core(
                E::InvalidParameter(_)
                | E::CapacityExceeded { .. }
                | E::TooManyValues { .. }
                | E::ShapeMismatch(_)
                | E::RefreshDisabled,
            ) => 2,
            _ => 1,
        }
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;
