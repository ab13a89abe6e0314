use std::path::{Path, PathBuf};

use mfgas_core::GasError;
use thiserror::Error;

use crate::validate::Finding;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("invalid configuration: {}", .0.iter().map(|f| f.to_string()).collect::<Vec<_>>().join("; "))]
    Validation(Vec<Finding>),

    #[error("cannot parse configuration: {0}")]
    Parse(String),

    #[error("stage `{stage}` failed: {source}")]
    Stage {
        stage: String,
        #[source]
        source: GasError,
    },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: malformed data: {reason}")]
    Data { path: PathBuf, reason: String },
}

impl CliError {
    pub(crate) fn io(path: &Path, source: std::io::Error) -> Self {
        CliError::Io { path: path.to_path_buf(), source }
    }

    pub(crate) fn data(path: &Path, reason: impl ToString) -> Self {
        CliError::Data { path: path.to_path_buf(), reason: reason.to_string() }
    }

    pub(crate) fn stage(stage: impl Into<String>) -> impl FnOnce(GasError) -> Self {
        let stage = stage.into();
        move |source| CliError::Stage { stage, source }
    }

    /// Process exit code: 1 for configuration and input problems, 2 for numerical non-convergence.
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Stage { source: GasError::NonConvergence { .. } | GasError::DomainTooSmall { .. }, .. } => 2,
            _ => 1,
        }
    }
}
