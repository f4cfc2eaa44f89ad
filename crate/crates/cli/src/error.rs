use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{path}:{line}: {message}")]
    Config {
        path: String,
        line: usize,
        message: String,
    },
    #[error(transparent)]
    Core(#[from] deltaloop_core::Error),
    #[error("{context}: {source}")]
    Io {
        context: String,
        source: std::io::Error,
    },
}

impl CliError {
    /// 1 for numerical failures, 2 for usage and configuration errors.
    pub fn exit_code(&self) -> u8 {
        use deltaloop_core::Error as E;
        match self {
            CliError::Usage(_) | CliError::Config { .. } => 2,
            CliError::Core(
                E::InvalidInput(_) | E::Domain(_) | E::Precondition(_) | E::Geometry(_),
            ) => 2,
            CliError::Core(_) | CliError::Io { .. } => 1,
        }
    }

    pub fn io(context: impl Into<String>, source: std::io::Error) -> Self {
        CliError::Io {
            context: context.into(),
            source,
        }
    }
}
