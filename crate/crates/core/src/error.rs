//! Error taxonomy shared by the library and the CLI.

use thiserror::Error;

/// Everything that can go wrong while loading data or estimating.
///
/// Variants split into two classes: problems with the inputs the caller
/// supplied (schema, parsing, validation, configuration) and problems that
/// arise during estimation (degenerate data, numeric failures). The CLI maps
/// the first class to exit code 2 and the second to exit code 1.
#[derive(Debug, Error)]
pub enum Error {
    /// A named column is absent from the file or the dataset.
    #[error("missing column `{column}`: {context}")]
    MissingColumn { column: String, context: String },

    /// A cell could not be parsed as a finite number. `row` is the 1-based
    /// data row (excluding the header).
    #[error("row {row}, column `{column}`: {message}")]
    Parse {
        row: usize,
        column: String,
        message: String,
    },

    /// The assembled dataset violates a structural invariant.
    #[error("invalid dataset: {0}")]
    InvalidData(String),

    /// A hyperparameter, subset, fold count, or flag is out of range.
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    /// Estimation is impossible on this data (empty arm, degenerate VTE, ...).
    #[error("estimation failed: {0}")]
    Estimation(String),

    /// A non-finite value appeared mid-computation.
    #[error("numeric failure: {0}")]
    Numeric(String),

    #[error("I/O error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    /// True when the error reflects bad user input rather than a runtime
    /// estimation problem; the CLI reports these with exit code 2.
    pub fn is_usage(&self) -> bool {
        matches!(
            self,
            Error::MissingColumn { .. }
                | Error::Parse { .. }
                | Error::InvalidData(_)
                | Error::InvalidConfig(_)
                | Error::Io { .. }
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
