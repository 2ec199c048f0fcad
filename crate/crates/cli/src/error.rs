use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Validation(String),

    #[error("config {path}: {source}")]
    Config {
        path: PathBuf,
        #[source]
        source: toml::de::Error,
    },

    #[error(transparent)]
    Core(#[from] isinglab::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl CliError {
    /// 2 for a runtime invariant breach, 1 for everything else.
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Core(isinglab::Error::InvariantBreach(_)) => 2,
            _ => 1,
        }
    }
}

pub fn validation(msg: impl Into<String>) -> CliError {
    CliError::Validation(msg.into())
}

pub type CliResult<T> = Result<T, CliError>;

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exit_codes() {
        assert_eq!(validation("x").exit_code(), 1);
        assert_eq!(
            CliError::Core(isinglab::Error::InvalidParameter("x".into())).exit_code(),
            1
        );
        assert_eq!(
            CliError::Core(isinglab::Error::InvariantBreach("x".into())).exit_code(),
            2
        );
    }
}
