use thiserror::Error;

use tribody::Error as CoreError;

#[derive(Debug, Error)]
pub enum CliError {
    /// Rejected configuration, reported with the offending key path.
    #[error("{key}: {message}")]
    Config { key: String, message: String },

    #[error("{context}: {source}")]
    Io {
        context: String,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Core(#[from] CoreError),
}

impl CliError {
    pub fn config(key: impl Into<String>, message: impl Into<String>) -> Self {
        CliError::Config {
            key: key.into(),
            message: message.into(),
        }
    }

    pub fn io(context: impl Into<String>, source: std::io::Error) -> Self {
        CliError::Io {
            context: context.into(),
            source,
        }
    }

    /// Attaches a key path to a core validation error; other errors pass through.
    pub fn at_key(key: &str, err: CoreError) -> Self {
        match err {
            CoreError::Domain(m) | CoreError::Config(m) | CoreError::Precondition(m) => Self::config(key, m),
            e @ CoreError::OutOfRange { .. } => Self::config(key, e.to_string()),
            other => CliError::Core(other),
        }
    }

    /// Process exit code: 1 I/O, 2 configuration or domain, 3 numerical, 4 instability.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config { .. } => 2,
            CliError::Io { .. } => 1,
            CliError::Core(e) => match e.root() {
                CoreError::Io(_) | CoreError::Csv(_) | CoreError::Json(_) => 1,
                CoreError::Domain(_)
                | CoreError::Config(_)
                | CoreError::Precondition(_)
                | CoreError::OutOfRange { .. }
                | CoreError::Length(_)
                | CoreError::InconsistentData(_) => 2,
                CoreError::Unstable { .. } => 4,
                _ => 3,
            },
        }
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;
