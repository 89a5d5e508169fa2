use fgat_core::FgatError;

/// Command failure, split by exit code.
#[derive(Debug, thiserror::Error)]
pub enum CliError {
    /// Bad flag or config value; exit 1.
    #[error("{0}")]
    Usage(String),
    /// Unreadable or unusable input data; exit 2.
    #[error("{0}")]
    Dataset(String),
    /// Anything that fails after inputs were accepted; exit 1.
    #[error(transparent)]
    Run(#[from] FgatError),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Dataset(_) => 2,
            CliError::Usage(_) | CliError::Run(_) => 1,
        }
    }

    /// Classifies a library error raised while reading or splitting input.
    pub fn from_data(context: &str, err: FgatError) -> Self {
        match err {
            FgatError::Io { .. }
            | FgatError::Parse { .. }
            | FgatError::EmptyGraph
            | FgatError::InvalidGraph(_)
            | FgatError::EmptySplit(_)
            | FgatError::InsufficientPairs { .. }
            | FgatError::Checkpoint(_) => CliError::Dataset(format!("{context}: {err}")),
            FgatError::InvalidArgument(_) | FgatError::InvalidRatios(_) => CliError::Usage(format!("{context}: {err}")),
            other => CliError::Run(other),
        }
    }
}
