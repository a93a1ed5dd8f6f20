use std::path::{Path, PathBuf};

use thiserror::Error;

pub type Result<T> = std::result::Result<T, AppError>;

#[derive(Debug, Error)]
pub enum AppError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{path}: {source}")]
    Csv { path: PathBuf, source: csv::Error },
    #[error("{path}: {source}")]
    Json { path: PathBuf, source: serde_json::Error },
    #[error("{path}: {reason}")]
    Format { path: PathBuf, reason: String },
    #[error("{path}: {source}")]
    Data { path: PathBuf, source: alphaforge_core::Error },
    #[error("configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Core(#[from] alphaforge_core::Error),
}

impl AppError {
    pub fn io(path: &Path, source: std::io::Error) -> Self {
        AppError::Io { path: path.to_path_buf(), source }
    }

    pub fn format(path: &Path, reason: impl Into<String>) -> Self {
        AppError::Format { path: path.to_path_buf(), reason: reason.into() }
    }

    /// Process exit code: 1 for bad input or configuration, 3 for failures
    /// inside the computation itself.
    pub fn exit_code(&self) -> i32 {
        use alphaforge_core::Error as E;
        match self {
            AppError::Core(e) => match e {
                E::InvalidConfig(_)
                | E::InsufficientData { .. }
                | E::InsufficientHistory { .. }
                | E::EmptyIntersection
                | E::FrequencyGap { .. }
                | E::AssetMismatch
                | E::DateMisalignment(_)
                | E::InsufficientOverlap { .. }
                | E::MissingWindow { .. } => 1,
                _ => 3,
            },
            _ => 1,
        }
    }
}
