//! Crate-wide error type.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// Operand shapes are incompatible for the named operation.
    #[error("shape mismatch in {op}: {lhs:?} vs {rhs:?}")]
    ShapeMismatch {
        op: &'static str,
        lhs: Vec<usize>,
        rhs: Vec<usize>,
    },

    /// An API precondition was violated by the caller.
    #[error("contract violation: {0}")]
    Contract(String),

    /// A data file could not be parsed.
    #[error("parse error in {path} line {line}: {msg}")]
    Parse {
        path: String,
        line: u64,
        msg: String,
    },

    /// A parsed value failed range or schema validation.
    #[error("validation error: {0}")]
    Validation(String),

    /// The R² score is undefined because the actual values have zero
    /// total sum of squares.
    #[error("R\u{b2} is undefined: actual values have zero total sum of squares")]
    UndefinedR2,

    /// Training aborted on a non-finite quantity.
    #[error("training failure: {0}")]
    Training(String),

    /// A model container could not be read (bad magic, version, or layout).
    #[error("model container format error: {0}")]
    Format(String),

    #[error("I/O error on {path}: {source}")]
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
}
