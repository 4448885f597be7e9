use std::path::PathBuf;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("deck line {line}: {msg}")]
    Deck { line: usize, msg: String },

    #[error("unknown key `{0}`")]
    UnknownKey(String),

    #[error("unknown preset `{0}` (expected lj-32|sd-halfdomain)")]
    UnknownPreset(String),

    #[error("invalid value `{value}` for `{key}`: {reason}")]
    InvalidValue { key: String, value: String, reason: String },

    #[error("invalid `{field}`: {reason}")]
    Invalid { field: &'static str, reason: String },

    #[error(transparent)]
    Core(#[from] nanopair_core::error::Error),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl CliError {
    pub fn invalid(field: &'static str, reason: impl Into<String>) -> Self {
        CliError::Invalid {
            field,
            reason: reason.into(),
        }
    }

    pub fn invalid_value(key: &str, value: &str, reason: impl Into<String>) -> Self {
        CliError::InvalidValue {
            key: key.to_string(),
            value: value.to_string(),
            reason: reason.into(),
        }
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.into(),
            source,
        }
    }

    /// Process exit code: 2 for bad input, 1 for failures during the run.
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Core(nanopair_core::error::Error::Config { .. }) => 2,
            CliError::Core(_) | CliError::Io { .. } => 1,
            _ => 2,
        }
    }
}
