use std::fmt;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// Shapes, lengths or grids do not line up.
    #[error("structural error: {0}")]
    Structural(String),
    /// Input outside the mathematical domain of an operation.
    #[error("domain error: {0}")]
    Domain(String),
    #[error("config error [{code}]: {message}")]
    Config { code: ConfigCode, message: String },
    #[error("format error: {0}")]
    Format(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn structural(msg: impl Into<String>) -> Self {
        Error::Structural(msg.into())
    }

    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub(crate) fn config(code: ConfigCode, msg: impl Into<String>) -> Self {
        Error::Config {
            code,
            message: msg.into(),
        }
    }

    /// Process exit code used by the CLI.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Structural(_) => 3,
            Error::Domain(_) => 4,
            Error::Config { code, .. } => code.exit_code(),
            Error::Format(_) => 5,
            Error::Io(_) => 6,
        }
    }
}

/// Distinct configuration failure classes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ConfigCode {
    Parse,
    UnknownKey,
    MissingKey,
    InvalidValue,
    InadmissibleEps,
    Resolution,
    Constraint,
    Threshold,
}

impl ConfigCode {
    pub fn as_str(self) -> &'static str {
        match self {
            ConfigCode::Parse => "E_PARSE",
            ConfigCode::UnknownKey => "E_UNKNOWN_KEY",
            ConfigCode::MissingKey => "E_MISSING_KEY",
            ConfigCode::InvalidValue => "E_INVALID_VALUE",
            ConfigCode::InadmissibleEps => "E_INADMISSIBLE_EPS",
            ConfigCode::Resolution => "E_RESOLUTION",
            ConfigCode::Constraint => "E_CONSTRAINT",
            ConfigCode::Threshold => "E_THRESHOLD",
        }
    }

    pub fn exit_code(self) -> i32 {
        match self {
            ConfigCode::Parse => 10,
            ConfigCode::UnknownKey => 11,
            ConfigCode::MissingKey => 12,
            ConfigCode::InvalidValue => 13,
            ConfigCode::InadmissibleEps => 14,
            ConfigCode::Resolution => 15,
            ConfigCode::Constraint => 16,
            ConfigCode::Threshold => 17,
        }
    }
}

impl fmt::Display for ConfigCode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}
