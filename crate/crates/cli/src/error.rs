use std::io;

use mpov_core::ErrorClass;
use thiserror::Error;

pub type CliResult<T> = Result<T, CliError>;

/// Exit statuses. Argument parsing failures use [`EXIT_USAGE`].
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_VALIDATION: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;
pub const EXIT_IO: i32 = 4;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),

    /// Malformed or inconsistent configuration; the message names the field.
    #[error("{0}")]
    Config(String),

    #[error(transparent)]
    Core(#[from] mpov_core::Error),

    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: io::Error,
    },

    #[error("{path}: {source}")]
    Csv {
        path: String,
        #[source]
        source: csv::Error,
    },

    #[error("{path}: {source}")]
    Image {
        path: String,
        #[source]
        source: image::ImageError,
    },

    #[error("{0}")]
    Json(#[from] serde_json::Error),

    /// Failure inside a named stage of a scenario run.
    #[error("stage {stage}: {source}")]
    Stage {
        stage: String,
        #[source]
        source: Box<CliError>,
    },
}

impl CliError {
    pub fn io(path: impl Into<String>, source: io::Error) -> Self {
        CliError::Io {
            path: path.into(),
            source,
        }
    }

    pub fn in_stage(self, stage: impl Into<String>) -> Self {
        CliError::Stage {
            stage: stage.into(),
            source: Box::new(self),
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => EXIT_USAGE,
            CliError::Config(_) => EXIT_VALIDATION,
            CliError::Core(e) => match e.class() {
                ErrorClass::Validation => EXIT_VALIDATION,
                ErrorClass::Numerical => EXIT_NUMERICAL,
                ErrorClass::Io => EXIT_IO,
            },
            CliError::Csv { source, .. } => match source.kind() {
                csv::ErrorKind::Io(_) => EXIT_IO,
                _ => EXIT_VALIDATION,
            },
            CliError::Io { .. } | CliError::Image { .. } | CliError::Json(_) => EXIT_IO,
            CliError::Stage { source, .. } => source.exit_code(),
        }
    }
}
