//! Crate-wide error type.

use thiserror::Error;

/// Coarse classification used by callers that map failures to exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorCategory {
    /// Malformed configuration, schema violations, invalid parameters.
    Config,
    /// Data/model disagreement (names, dimensions, counts).
    Mismatch,
    /// Failures while running (I/O, child processes, solver breakdown).
    Runtime,
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("cannot open {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("csv error in {path}: {message}")]
    Csv { path: String, message: String },

    #[error("duplicate column name {name:?} in header")]
    DuplicateHeader { name: String },

    #[error("non-numeric cell {value:?} at row {row}, column {column:?}")]
    NonNumericCell {
        row: usize,
        column: String,
        value: String,
    },

    #[error("non-finite cell at row {row}, column {column:?}")]
    NonFiniteCell { row: usize, column: String },

    #[error("row {row} has {found} fields, expected {expected}")]
    RaggedRow {
        row: usize,
        found: usize,
        expected: usize,
    },

    #[error("unknown column {name:?}")]
    UnknownColumn { name: String },

    #[error("dataset is empty")]
    EmptyDataset,

    #[error("feature names do not match: {detail}")]
    FeatureMismatch { detail: String },

    #[error("dimension mismatch: expected {expected} features, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("invalid synthetic spec: {detail}")]
    InvalidSyntheticSpec { detail: String },

    #[error("model schema error: {detail}")]
    ModelSchema { detail: String },

    #[error("unsupported model type {kind:?}")]
    UnsupportedModel { kind: String },

    #[error("tree structure error: {detail}")]
    TreeStructure { detail: String },

    #[error("failed to spawn predictor process {command:?}: {source}")]
    ProcessSpawn {
        command: String,
        #[source]
        source: std::io::Error,
    },

    #[error("predictor process failed: {detail}")]
    ProcessFailure { detail: String },

    #[error("predictor process timed out after {seconds}s")]
    ProcessTimeout { seconds: u64 },

    #[error("predictor reply line {line} is not a number: {value:?}")]
    ReplyParse { line: usize, value: String },

    #[error("predictor replied with {got} values, expected {expected}")]
    ReplyCount { expected: usize, got: usize },

    #[error("empty background dataset")]
    EmptyBackground,

    #[error("invalid configuration: {detail}")]
    InvalidConfig { detail: String },

    #[error("exact solve needs {n} features, above the limit of {max}")]
    TooManyFeatures { n: usize, max: usize },

    #[error("k-means requires k <= {rows} rows, got k = {k}")]
    KmeansTooManyClusters { k: usize, rows: usize },

    #[error("{op} requires a non-empty sample set")]
    EmptySamples { op: &'static str },

    #[error("explanations mix methods: {a:?} vs {b:?}")]
    MixedMethods { a: String, b: String },

    #[error("explanation is not pairwise (method {method:?})")]
    NotPairwise { method: String },

    #[error("no expected sign declared for feature {name:?}")]
    MissingSign { name: String },

    #[error("{count} row(s) failed; first: row {first_row}: {first_error}")]
    Batch {
        count: usize,
        first_row: usize,
        first_error: String,
        failures: Vec<(usize, String)>,
    },
}

impl Error {
    pub fn category(&self) -> ErrorCategory {
        use Error::*;
        match self {
            DuplicateHeader { .. }
            | NonNumericCell { .. }
            | NonFiniteCell { .. }
            | RaggedRow { .. }
            | InvalidSyntheticSpec { .. }
            | ModelSchema { .. }
            | UnsupportedModel { .. }
            | TreeStructure { .. }
            | InvalidConfig { .. }
            | Csv { .. } => ErrorCategory::Config,
            UnknownColumn { .. }
            | FeatureMismatch { .. }
            | DimensionMismatch { .. }
            | EmptyDataset
            | EmptyBackground
            | KmeansTooManyClusters { .. }
            | TooManyFeatures { .. }
            | MixedMethods { .. }
            | NotPairwise { .. }
            | MissingSign { .. }
            | EmptySamples { .. } => ErrorCategory::Mismatch,
            Io { .. }
            | ProcessSpawn { .. }
            | ProcessFailure { .. }
            | ProcessTimeout { .. }
            | ReplyParse { .. }
            | ReplyCount { .. } => ErrorCategory::Runtime,
            Batch { failures, .. } => failures
                .first()
                .map(|_| ErrorCategory::Runtime)
                .unwrap_or(ErrorCategory::Runtime),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
