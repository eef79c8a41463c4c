use std::path::Path;

use adaquery_core::Error as CoreError;

#[derive(Debug, thiserror::Error)]
pub enum RunError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("invalid configuration: field `{field}`: {reason}")]
    Field { field: String, reason: String },
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("writing csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("writing json: {0}")]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Core(#[from] CoreError),
}

impl RunError {
    pub fn field(field: impl Into<String>, reason: impl Into<String>) -> Self {
        RunError::Field {
            field: field.into(),
            reason: reason.into(),
        }
    }

    pub fn io(path: &Path, source: std::io::Error) -> Self {
        RunError::Io {
            path: path.display().to_string(),
            source,
        }
    }

    /// Maps a parameter error from the core crate onto the config field
    /// that supplied it.
    pub fn param(field: &str, err: CoreError) -> Self {
        RunError::field(format!("params.{field}"), err.to_string())
    }
}
