use std::path::PathBuf;

use thiserror::Error;

use crate::model::ValidationReport;
use crate::recourse::Solution;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SimilarityError {
    #[error("dimension mismatch: {left} vs {right}")]
    DimensionMismatch { left: usize, right: usize },
    #[error("zero-norm vector has no direction")]
    ZeroNorm,
    #[error("embedding entries must be finite")]
    NonFinite,
    #[error("embedding dimension must be >= 1")]
    EmptyVector,
    #[error("corpus for device {0} is empty")]
    EmptyCorpus(usize),
    #[error("corpus entry {category:?} on device {device} has count 0")]
    ZeroCount { device: usize, category: String },
    #[error("no embedding for text {0:?}")]
    MissingEmbedding(String),
    #[error("configuration error: {0}")]
    Config(String),
}

#[derive(Debug, Error)]
pub enum SolverError {
    #[error("infeasible: VSP {vsp} needs {requirement} relevant transmissions but no device has positive similarity")]
    Infeasible { vsp: usize, requirement: f64 },
    #[error("node limit {limit} exceeded; best incumbent total {}", .incumbent.cost.total)]
    NodeLimit {
        limit: u64,
        /// Best plan found before the search was cut off. Not proven optimal.
        incumbent: Box<Solution>,
    },
    #[error("invalid input: {0}")]
    Invalid(String),
}

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: schema error at {pointer}: {message}")]
    Schema {
        path: PathBuf,
        /// JSON pointer to the offending value.
        pointer: String,
        message: String,
    },
    #[error("{path}: csv error: {message}")]
    Csv { path: PathBuf, message: String },
    #[error("invalid problem: {0}")]
    Validation(#[from] ValidationReport),
    #[error(transparent)]
    Similarity(#[from] SimilarityError),
}
