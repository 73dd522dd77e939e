use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: csv error: {source}")]
    Csv {
        path: PathBuf,
        #[source]
        source: csv::Error,
    },

    /// A cell could not be read as a finite 64-bit float. `row` is the
    /// 1-based line number in the file, `column` the 1-based field index.
    #[error("parse error at row {row}, column {column}: {message}")]
    Parse {
        row: usize,
        column: usize,
        message: String,
    },

    #[error("validation error: {0}")]
    Validation(String),

    #[error("dimension mismatch in {context}: expected {expected}, got {actual}")]
    DimensionMismatch {
        context: &'static str,
        expected: usize,
        actual: usize,
    },

    #[error("alpha {index} ({id}) has degenerate sample variance {variance:e}")]
    DegenerateAlpha {
        index: usize,
        id: String,
        variance: f64,
    },

    #[error("insufficient observations after mode removal: need M >= 2, have M = {m}")]
    InsufficientObservations { m: usize },

    #[error("{what} with N = {n} exceeds the dense-oracle cap of {cap}")]
    DenseCapExceeded {
        what: &'static str,
        n: usize,
        cap: usize,
    },

    /// The regression Gram matrix is numerically singular.
    #[error(
        "singular design: condition estimate {condition:e} exceeds {limit:e}; \
         smallest pivot at column {column}"
    )]
    SingularDesign {
        condition: f64,
        limit: f64,
        column: usize,
    },

    #[error("rank-deficient loadings: column {column} is linearly dependent on earlier columns")]
    RankDeficient { column: usize },

    #[error("matrix is not positive definite (failed at pivot {pivot})")]
    NotPositiveDefinite { pivot: usize },

    #[error("degenerate expected returns: weights cannot be normalized (sum of |w| = {abs_sum:e})")]
    DegenerateWeights { abs_sum: f64 },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("allocation of {bytes} bytes failed")]
    Allocation { bytes: usize },

    #[error("numerical failure: {0}")]
    Numerical(String),
}

impl Error {
    pub(crate) fn validation(msg: impl Into<String>) -> Self {
        Error::Validation(msg.into())
    }

    pub(crate) fn param(msg: impl Into<String>) -> Self {
        Error::InvalidParameter(msg.into())
    }
}
