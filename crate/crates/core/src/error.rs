use alloc::string::String;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("dimension mismatch in {op}: expected {expected}, found {found}")]
    Dimension {
        op: &'static str,
        expected: String,
        found: String,
    },
    #[error("index {index} out of range (limit {limit}) in {op}")]
    Index {
        op: &'static str,
        index: usize,
        limit: usize,
    },
    #[error("configuration error: {0}")]
    Config(String),
    #[error("non-finite value in {0}")]
    Numeric(String),
    #[error("internal consistency error: {0}")]
    Consistency(String),
    #[error("format error at byte {offset}: {message}")]
    Format { offset: usize, message: String },
}

impl Error {
    pub(crate) fn dim(op: &'static str, expected: impl Into<String>, found: impl Into<String>) -> Self {
        Error::Dimension {
            op,
            expected: expected.into(),
            found: found.into(),
        }
    }

    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }
}
