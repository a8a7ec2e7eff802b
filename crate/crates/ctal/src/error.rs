//! Error type shared across the crate.

use std::path::PathBuf;

use thiserror::Error;

/// Errors raised by dataset ingestion, model fitting and the experiment
/// harness.
#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("csv error on {path}: {source}")]
    Csv {
        path: PathBuf,
        #[source]
        source: csv::Error,
    },

    #[error("no data rows in {path}")]
    EmptyDataset { path: PathBuf },

    #[error("row {row} has {found} fields, expected {expected}")]
    RaggedRow {
        row: usize,
        expected: usize,
        found: usize,
    },

    #[error("label column {0:?} not found")]
    LabelColumnNotFound(String),

    #[error("non-finite or non-parsable value {value:?} at row {row}, column {column:?}")]
    BadNumericCell {
        row: usize,
        column: String,
        value: String,
    },

    #[error("empty cell at row {row}, column {column:?}; missing values are not supported")]
    MissingValue { row: usize, column: String },

    #[error("dataset has a single class; at least two are required")]
    SingleClass,

    #[error("test fraction {0} outside the open interval (0, 1)")]
    InvalidTestFraction(f64),

    #[error("split leaves the training side empty (n = {n}, test size = {test_size})")]
    EmptyTrainSide { n: usize, test_size: usize },

    #[error("cannot fit on an empty index set")]
    EmptyTrainingSet,

    #[error("feature vector has dimension {found}, expected {expected}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("cluster count {k} invalid for {n} samples")]
    BadClusterCount { k: usize, n: usize },

    #[error("sample {index} is not a member of the cluster")]
    NotAClusterMember { index: usize },

    #[error("labeled set of size {labeled} is too small to fit a tree (min_samples_leaf = {min_samples_leaf})")]
    UnfittableTree {
        labeled: usize,
        min_samples_leaf: usize,
    },

    #[error("selection budget must be at least 1")]
    ZeroBudget,

    #[error("budget {budget} exceeds the candidate pool of size {pool}")]
    BudgetExceedsPool { budget: usize, pool: usize },

    #[error("empty sample passed to a statistic")]
    EmptySample,

    #[error("class id {id} out of range for {n_classes} classes")]
    ClassOutOfRange { id: usize, n_classes: usize },

    #[error("invalid probability vector: {0}")]
    InvalidProbabilities(String),

    #[error("unknown strategy {name:?}; valid identifiers: {valid}")]
    UnknownStrategy { name: String, valid: String },

    #[error("invalid experiment config: {0}")]
    InvalidConfig(String),

    #[error("config file {path}: {message}")]
    ConfigFile { path: PathBuf, message: String },

    #[error("records file {path}: {message}")]
    RecordsFile { path: PathBuf, message: String },
}

pub type Result<T> = std::result::Result<T, Error>;
