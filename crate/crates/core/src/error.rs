use thiserror::Error;

/// Errors raised by the model, gradient engines and trainer.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("degenerate corpus: need at least 2 distinct symbols, found {0}")]
    DegenerateCorpus(usize),

    #[error("duplicate symbol {0:?} in vocabulary")]
    DuplicateSymbol(char),

    #[error("symbol index {index} out of range for vocabulary of size {size}")]
    IndexOutOfRange { index: usize, size: usize },

    #[error("symbol {0:?} is not in the vocabulary")]
    UnknownSymbol(char),

    #[error("non-finite value in matrix {matrix}")]
    NonFinite { matrix: &'static str },

    #[error("non-finite update to matrix {matrix} at batch {batch}")]
    NumericAbort { matrix: &'static str, batch: usize },

    #[error("batch shape mismatch: {0}")]
    BatchShape(String),

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("corpus too short: {len} symbols, need at least {needed}")]
    CorpusTooShort { len: usize, needed: usize },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("origin {origin} outside the itemized domain: {reason}")]
    OriginOutOfDomain { origin: usize, reason: String },
}

pub type Result<T> = std::result::Result<T, Error>;

/// Errors reading, validating or appending to the on-disk JSON formats
/// (gradient log and model file). `path` locates the offending field,
/// e.g. `records[3].max_gradient`.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum FormatError {
    #[error("malformed JSON at {path}: {message}")]
    Parse { path: String, message: String },

    #[error("unsupported schema_version {found}, expected {expected}")]
    SchemaVersion { found: String, expected: u32 },

    #[error("invalid value at {path}: {message}")]
    Invalid { path: String, message: String },
}

impl FormatError {
    pub(crate) fn invalid(path: impl Into<String>, message: impl Into<String>) -> Self {
        Self::Invalid {
            path: path.into(),
            message: message.into(),
        }
    }
}
