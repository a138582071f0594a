//! Error type shared across the crate.

use thiserror::Error;

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// Matrix/vector dimensions do not agree.
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    /// A data row exceeds the L-infinity bound required by the private
    /// pipelines.
    #[error("row {row} has |x|_inf = {norm} > 1 (tolerance {tol})")]
    RowBoundViolation { row: usize, norm: f64, tol: f64 },

    /// A target entry exceeds the constraint radius.
    #[error("target bound violated: |y[{row}]| = {value} > lambda = {lambda}")]
    TargetBoundViolation { row: usize, value: f64, lambda: f64 },

    /// A scalar parameter is outside its admissible range.
    #[error("invalid parameter {name}: {message}")]
    InvalidParameter { name: &'static str, message: String },

    /// An operation received an empty input it cannot act on.
    #[error("empty input: {0}")]
    EmptyInput(&'static str),

    /// The iterate is outside the constraint set.
    #[error("infeasible iterate: ||w||_1 = {norm} > lambda = {lambda}")]
    Infeasible { norm: f64, lambda: f64 },

    /// A cell of a CSV file failed to parse as a float.
    #[error("csv parse error at row {row}, column {column}: {message}")]
    CsvParse {
        row: usize,
        column: String,
        message: String,
    },

    /// The requested CSV target column does not exist.
    #[error("target column not found: {0}")]
    MissingTargetColumn(String),

    /// A non-finite value was found where a finite one is required.
    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn invalid(name: &'static str, message: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            message: message.into(),
        }
    }
}
