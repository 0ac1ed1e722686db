use std::path::PathBuf;

use thiserror::Error;
use wice_core::error::WiceError;

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_DATA: i32 = 2;
pub const EXIT_NUMERIC: i32 = 3;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("config {path}: {message}")]
    Config { path: String, message: String },
    #[error("missing prerequisite {artifact}: {path} does not exist")]
    MissingPrerequisite { artifact: String, path: PathBuf },
    #[error("{artifact} was built from {input} {recorded} but the {input} given has hash {actual}")]
    LineageMismatch { artifact: String, input: String, recorded: String, actual: String },
    #[error("{path}: contents do not match the digest recorded in its metadata")]
    DigestMismatch { path: PathBuf },
    #[error("{path}: bad metadata: {message}")]
    Metadata { path: PathBuf, message: String },
    #[error("{stage}: {failed} of {total} items failed, rate {rate:.3} is above the limit {limit}")]
    ErrorRate { stage: String, failed: usize, total: usize, rate: f64, limit: f64 },
    #[error(transparent)]
    Core(#[from] WiceError),
}

impl CliError {
    pub fn missing(artifact: &str, path: impl Into<PathBuf>) -> Self {
        CliError::MissingPrerequisite { artifact: artifact.to_string(), path: path.into() }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) | CliError::Config { .. } => EXIT_USAGE,
            CliError::Core(e) if e.is_numeric() => EXIT_NUMERIC,
            CliError::Core(e) => match e.root() {
                WiceError::InvalidConfig(_) | WiceError::InvalidDimension { .. } => EXIT_USAGE,
                _ => EXIT_DATA,
            },
            _ => EXIT_DATA,
        }
    }
}

pub type CliResult<T> = Result<T, CliError>;

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exit_codes() {
        assert_eq!(CliError::Usage("x".into()).exit_code(), EXIT_USAGE);
        assert_eq!(CliError::missing("checkpoint", "m.ckpt").exit_code(), EXIT_DATA);
        assert_eq!(CliError::Core(WiceError::EmptyCorpus).exit_code(), EXIT_DATA);
        let nan = WiceError::NonFiniteGradient { param: "w".into(), context: None };
        assert_eq!(CliError::Core(nan.for_page("p")).exit_code(), EXIT_NUMERIC);
        assert_eq!(CliError::Core(WiceError::InvalidConfig("x".into())).exit_code(), EXIT_USAGE);
    }

    #[test]
    fn missing_prerequisite_names_the_artifact() {
        let e = CliError::missing("checkpoint", "run/model.ckpt");
        assert_eq!(e.to_string(), "missing prerequisite checkpoint: run/model.ckpt does not exist");
    }
}
