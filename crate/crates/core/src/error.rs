use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("schema error: {0}")]
    Schema(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("invalid state: {0}")]
    InvalidState(String),

    #[error("degenerate data: {0}")]
    Degenerate(String),

    #[error("split error: {0}")]
    Split(String),

    #[error("{pool} pool is empty")]
    EmptyPool { pool: &'static str },

    #[error("logistic fit separated: fitted probabilities reached 0 or 1 (largest coefficient: {direction})")]
    Separation { direction: String },

    #[error("IRLS did not converge after {iterations} iterations (max |score| = {max_score:e}, deviance = {deviance})")]
    NonConvergence {
        iterations: usize,
        max_score: f64,
        deviance: f64,
    },

    #[error("design is rank deficient; collinear columns: {}", columns.join(", "))]
    RankDeficient { columns: Vec<String> },

    #[error("unsupported format version {found} (expected {expected})")]
    FormatVersion { found: u32, expected: u32 },

    #[error("replicate {index} failed after {attempts} attempts: {reason}")]
    Replicate {
        index: usize,
        attempts: usize,
        reason: String,
    },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    TomlDe(#[from] toml::de::Error),

    #[error(transparent)]
    TomlSer(#[from] toml::ser::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
