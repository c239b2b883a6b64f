use std::io;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("missing column `{0}` in header")]
    Schema(String),

    #[error("line {line}: {message}")]
    Row { line: u64, message: String },

    #[error("line {line}: unknown category label `{label}`")]
    UnknownLabel { line: u64, label: String },

    #[error("dataset is empty")]
    EmptyDataset,

    #[error("training requires labels (record `{0}` has none)")]
    MissingLabel(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("non-finite feature value at index {0}")]
    NonFinite(u32),

    #[error("length mismatch: {0} predictions vs {1} gold labels")]
    LengthMismatch(usize, usize),

    #[error("corrupt model bundle: {0}")]
    Corrupt(String),

    #[error("unsupported bundle format version {found} (this build reads {expected})")]
    Version { found: u32, expected: u32 },

    #[error(transparent)]
    Io(#[from] io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn row(line: u64, message: impl Into<String>) -> Self {
        Error::Row {
            line,
            message: message.into(),
        }
    }

    /// True for errors caused by the input data rather than by usage or a bug.
    pub fn is_data_error(&self) -> bool {
        matches!(
            self,
            Error::Schema(_)
                | Error::Row { .. }
                | Error::UnknownLabel { .. }
                | Error::EmptyDataset
                | Error::MissingLabel(_)
                | Error::Corrupt(_)
                | Error::Version { .. }
                | Error::Csv(_)
                | Error::NonFinite(_)
        )
    }
}
