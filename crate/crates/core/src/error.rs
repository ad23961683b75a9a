use std::io;
use std::path::PathBuf;

use thiserror::Error;

use crate::model::SourceId;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ModelError {
    #[error("every cell of the column is empty")]
    AllEmpty,
    #[error("table has no columns or no rows")]
    EmptyTable,
    #[error("column {column} has {found} values, expected {expected}")]
    RaggedTable {
        column: usize,
        expected: usize,
        found: usize,
    },
    #[error("concept label is empty after normalization")]
    EmptyConcept,
    #[error("invalid source id {0:?} (allowed: ASCII letters, digits, '-' and '_')")]
    InvalidSourceId(String),
}

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("malformed file {path}: {reason}")]
    MalformedFile { path: PathBuf, reason: String },
    #[error("no concept qualifies for the concept universe")]
    EmptyUniverse,
    #[error("invalid manifest: {0}")]
    InvalidManifest(String),
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
}

#[derive(Debug, Error)]
pub enum IndexError {
    #[error("unknown source {0}")]
    UnknownSource(SourceId),
    #[error("invalid range [{min}, {max}]")]
    InvalidRange { min: f64, max: f64 },
    #[error("epsilon must satisfy 0 <= epsilon < 1, got {0}")]
    InvalidEpsilon(f64),
    #[error("tuple validation needs at least one categorical value")]
    BothNumeric,
    #[error("corrupt index at {path}: {reason}")]
    CorruptIndex { path: PathBuf, reason: String },
    #[error("invalid regex {pattern:?}: {reason}")]
    InvalidPattern { pattern: String, reason: String },
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
}

impl IndexError {
    pub(crate) fn corrupt(path: impl Into<PathBuf>, reason: impl Into<String>) -> Self {
        IndexError::CorruptIndex {
            path: path.into(),
            reason: reason.into(),
        }
    }
}

#[derive(Debug, Error)]
pub enum BeliefError {
    #[error("concept hierarchy contains a cycle through {0:?}")]
    CyclicHierarchy(String),
    #[error("embedding dimension mismatch on line {line}: expected {expected}, found {found}")]
    DimensionMismatch {
        line: usize,
        expected: usize,
        found: usize,
    },
    #[error("malformed line {line} in {what}: {reason}")]
    Malformed {
        what: &'static str,
        line: usize,
        reason: String,
    },
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EstimateError {
    #[error("no entity of the column was found in any source")]
    NoEvidence,
    #[error("no cell of the column parses as a number")]
    NoParseableValues,
    #[error("no pattern-tree leaf accepts the column values")]
    NoRoutedLeaves,
    #[error("invalid estimator configuration: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Model(#[from] ModelError),
}

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("evaluation case set is empty")]
    EmptyCaseSet,
    #[error("invalid case manifest: {0}")]
    InvalidCases(String),
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
}

/// Top-level error for the build/annotate/evaluate pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Ingest(#[from] IngestError),
    #[error(transparent)]
    Index(#[from] IndexError),
    #[error(transparent)]
    Belief(#[from] BeliefError),
    #[error(transparent)]
    Estimate(#[from] EstimateError),
    #[error(transparent)]
    Eval(#[from] EvalError),
}
