use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// A caller violated an operation's precondition.
    #[error("precondition violated: {0}")]
    Precondition(String),

    /// Malformed user-supplied input (texts, logprobs, annotation rows).
    #[error("invalid input: {0}")]
    Input(String),

    #[error("structural error: {0}")]
    Structural(String),

    #[error("backend unavailable at {endpoint} after {attempts} attempt(s): {last}")]
    BackendUnavailable {
        endpoint: &'static str,
        attempts: u32,
        last: String,
    },

    #[error("protocol error from {endpoint}: {message}")]
    Protocol { endpoint: &'static str, message: String },

    #[error("similarity undefined for a zero vector")]
    UndefinedSimilarity,

    #[error("embedding dimension mismatch: {left} vs {right}")]
    DimensionMismatch { left: usize, right: usize },

    #[error("generation failed: {0}")]
    Generation(String),

    #[error("foveation extraction produced an empty focus")]
    DegenerateFoveation,

    #[error("gap {gap_index} failed: {source}")]
    Gap {
        gap_index: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("step {step_index} failed: {source}")]
    Step {
        step_index: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("ingestion failed for {}: {message}", path.display())]
    Ingestion { path: PathBuf, message: String },

    #[error("no records match: {0}")]
    EmptySlice(String),

    #[error("template error: {0}")]
    Template(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("invalid PNG: {0}")]
    Png(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}
