//! Crate-wide error type.

use thiserror::Error;

/// Errors produced anywhere in the toolkit.
#[derive(Debug, Error)]
pub enum Error {
    /// A line of an input stream could not be decoded.
    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    /// An operation that requires data received none.
    #[error("empty dataset")]
    EmptyDataset,

    /// A lemma-disjoint split could not be formed.
    #[error("split error: {0}")]
    Split(String),

    /// A caller-supplied argument violates a precondition.
    #[error("invalid argument: {0}")]
    Argument(String),

    /// A target span could not be mapped onto encoder subtokens.
    #[error("alignment error: {0}")]
    Alignment(String),

    /// Cosine similarity is undefined for a zero vector.
    #[error("undefined similarity: zero vector")]
    UndefinedSimilarity,

    /// Whitening was requested for a component with (near-)zero variance.
    #[error("singular component {component}: variance {variance:.3e} too small to whiten")]
    SingularComponent { component: usize, variance: f64 },

    /// Threshold tuning needs at least one positive and one negative pair.
    #[error("degenerate tuning: scored pairs contain a single class")]
    DegenerateTuning,

    /// Batch construction dropped every lemma.
    #[error("empty training set: {0}")]
    EmptyTraining(String),

    /// A binary file does not follow the expected layout.
    #[error("format error: {0}")]
    Format(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
