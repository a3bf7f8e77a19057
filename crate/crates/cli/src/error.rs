use std::path::{Path, PathBuf};

use robustmt::corpusbuild::CorpusBuildError;
use robustmt::filtering::FilterError;
use robustmt::hook::HookError;
use robustmt::noise::NoiseError;
use robustmt::subword::SubwordError;
use thiserror::Error;

/// Every failure maps to one process exit code.
#[derive(Debug, Error)]
pub enum CliError {
    /// Bad arguments or configuration (exit 1).
    #[error("invalid configuration: {0}")]
    Validation(String),
    /// Unreadable, malformed or misaligned input data (exit 2).
    #[error("data error: {0}")]
    Data(String),
    /// An external hook failed (exit 3).
    #[error("hook failure: {0}")]
    Hook(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Validation(_) => 1,
            CliError::Data(_) => 2,
            CliError::Hook(_) => 3,
        }
    }

    pub fn io(path: &Path, e: std::io::Error) -> Self {
        CliError::Data(format!("{}: {e}", path.display()))
    }

    pub fn field(field: &str, message: impl std::fmt::Display) -> Self {
        CliError::Validation(format!("{field}: {message}"))
    }
}

pub type Result<T> = std::result::Result<T, CliError>;

impl From<HookError> for CliError {
    fn from(e: HookError) -> Self {
        CliError::Hook(e.to_string())
    }
}

impl From<SubwordError> for CliError {
    fn from(e: SubwordError) -> Self {
        match e {
            SubwordError::VocabTooSmall { .. } => CliError::Validation(e.to_string()),
            _ => CliError::Data(e.to_string()),
        }
    }
}

impl From<FilterError> for CliError {
    fn from(e: FilterError) -> Self {
        match e {
            FilterError::BadRatio(_) => CliError::Validation(e.to_string()),
            _ => CliError::Data(e.to_string()),
        }
    }
}

impl From<NoiseError> for CliError {
    fn from(e: NoiseError) -> Self {
        match e {
            NoiseError::Probability { .. } | NoiseError::UnknownLanguage(_) => CliError::Validation(e.to_string()),
            _ => CliError::Data(e.to_string()),
        }
    }
}

impl From<CorpusBuildError> for CliError {
    fn from(e: CorpusBuildError) -> Self {
        match e {
            CorpusBuildError::Hook { .. } => CliError::Hook(e.to_string()),
            CorpusBuildError::Plan { .. } | CorpusBuildError::InvalidCorpusTag(_) => {
                CliError::Validation(e.to_string())
            }
            _ => CliError::Data(e.to_string()),
        }
    }
}

/// Resolves `value` against the config directory.
pub fn resolve(base: &Path, value: &str) -> PathBuf {
    base.join(value.trim())
}
