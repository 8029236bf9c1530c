//! Crate-wide error type.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("token must be non-empty")]
    EmptyToken,

    #[error("embedding dimension must be >= 2, got {0}")]
    DimensionTooSmall(usize),

    #[error("fact list must be non-empty")]
    EmptyFactList,

    #[error("ridge coefficient must be > 0, got {0}")]
    NonPositiveRidge(f64),

    #[error("conflicting facts for (subject={subject}, relation={relation}): ids {first_id} and {second_id}")]
    ConflictingFacts {
        subject: String,
        relation: String,
        first_id: u64,
        second_id: u64,
    },

    #[error("duplicate fact id {0}")]
    DuplicateFactId(u64),

    #[error("shape mismatch: expected {expected_rows}x{expected_cols}, got {rows}x{cols}")]
    ShapeMismatch {
        expected_rows: usize,
        expected_cols: usize,
        rows: usize,
        cols: usize,
    },

    #[error("dimension mismatch: expected input of length {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("layer index {index} out of range for model with {count} layers")]
    LayerOutOfRange { index: usize, count: usize },

    #[error("edit key is zero")]
    ZeroKey,

    #[error("decode vocabulary is empty")]
    EmptyVocab,

    #[error("edit batch must be non-empty")]
    EmptyBatch,

    #[error("neuron count {m} out of range 1..={d_in}")]
    NeuronCountOutOfRange { m: usize, d_in: usize },

    #[error("selected neurons carry no key mass")]
    DegenerateSupport,

    #[error("linear system is singular or not positive definite")]
    SingularSystem,

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("retention percentage must be in (0, 100], got {0}")]
    InvalidKPercent(f64),

    #[error("epsilon must be > 0, got {0}")]
    InvalidEpsilon(f64),

    #[error("unknown {what}: {value}")]
    UnknownName { what: &'static str, value: String },

    #[error("holdout fact id {0} overlaps with an edited fact")]
    HoldoutOverlap(u64),

    #[error("invalid experiment config: {0}")]
    InvalidConfig(String),

    #[error("{path}:{line}: {message}")]
    FileFormat {
        path: String,
        line: usize,
        message: String,
    },

    #[error("duplicate fact id {id} in {path}: lines {first_line} and {second_line}")]
    DuplicateIdInFile {
        path: String,
        id: u64,
        first_line: usize,
        second_line: usize,
    },

    #[error("result rows must be non-empty")]
    EmptyRows,

    #[error("matrix must be non-empty")]
    EmptyMatrix,

    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub fn io(path: impl Into<String>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub fn file_format(path: impl Into<String>, line: usize, message: impl Into<String>) -> Self {
        Error::FileFormat {
            path: path.into(),
            line,
            message: message.into(),
        }
    }
}
