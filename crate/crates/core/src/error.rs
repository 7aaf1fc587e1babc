use alloc::string::String;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("invalid config `{field}`: {message}")]
    InvalidConfig {
        field: &'static str,
        message: String,
    },

    #[error("shape mismatch in {context}: expected {expected}, got {actual}")]
    Shape {
        context: &'static str,
        expected: String,
        actual: String,
    },

    #[error("{0}")]
    InvalidInput(String),

    #[error("masked loss requested but the mask selects nothing")]
    EmptyMask,

    #[error("non-finite value in {term}")]
    NonFinite { term: &'static str },

    #[error("predicted phase {value} outside [-3pi, 3pi]")]
    PhaseOutOfRange { value: f64 },

    #[error("zero-norm embedding (row {row}) has no cosine similarity")]
    ZeroVector { row: usize },

    #[error("metric undefined: {0}")]
    UndefinedMetric(&'static str),

    #[error("record source: {0}")]
    Source(String),
}

impl Error {
    pub(crate) fn config(field: &'static str, message: impl Into<String>) -> Self {
        Error::InvalidConfig {
            field,
            message: message.into(),
        }
    }

    pub(crate) fn shape(
        context: &'static str,
        expected: impl core::fmt::Display,
        actual: impl core::fmt::Display,
    ) -> Self {
        Error::Shape {
            context,
            expected: alloc::format!("{expected}"),
            actual: alloc::format!("{actual}"),
        }
    }
}
