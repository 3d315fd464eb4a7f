use std::io;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error: {0}")]
    Io(#[from] io::Error),

    #[error("line {line}: malformed input: {message}")]
    Malformed { line: usize, message: String },

    #[error("line {line}: missing field `{field}`")]
    MissingField { line: usize, field: &'static str },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("pair has zero co-occurrence and cannot be scored")]
    ZeroCooccurrence,

    #[error("no known pairs to build a dataset from")]
    EmptyDataset,

    #[error("line {line}: expected {expected} values, found {found}")]
    DimensionMismatch {
        line: usize,
        expected: usize,
        found: usize,
    },

    #[error("tokens missing from embedding file: {}", .0.join(", "))]
    MissingTokens(Vec<String>),

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("zero vector has no direction")]
    ZeroVector,

    #[error("undefined metric: {0}")]
    UndefinedMetric(String),

    #[error("non-finite gradient in `{0}`")]
    NonFiniteGradient(&'static str),

    #[error("unknown ingredient `{token}`")]
    UnknownIngredient {
        token: String,
        suggestions: Vec<String>,
    },

    #[error("an ingredient cannot be paired with itself (`{0}`)")]
    SelfPair(String),

    #[error("unknown predictor `{0}`")]
    UnknownPredictor(String),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}
