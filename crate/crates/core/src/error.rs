use thiserror::Error;

use crate::date::Month;

/// Errors raised anywhere in the forecasting pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("parse error at row {row}: {message}")]
    Parse { row: usize, message: String },

    #[error("validation error for series {series}: {message}")]
    Validation { series: String, message: String },

    #[error("domain error at index {index}: {message}")]
    Domain { index: usize, message: String },

    #[error("invalid argument: {0}")]
    Argument(String),

    #[error("rank-deficient design: collinear columns {columns:?}")]
    RankDeficient { columns: Vec<usize> },

    #[error("elastic net did not converge after {sweeps} sweeps (max coefficient change {max_change:.3e}, gap {gap:.3e})")]
    NoConvergence {
        sweeps: usize,
        max_change: f64,
        gap: f64,
        last_iterate: Vec<f64>,
    },

    #[error("svr solver did not converge after {iterations} iterations (max KKT violation {violation:.3e})")]
    SvrNoConvergence { iterations: usize, violation: f64 },

    #[error("non-finite value encountered: {0}")]
    NonFinite(String),

    #[error("criterion {criterion} unsupported for model family {family}")]
    UnsupportedCriterion { criterion: String, family: String },

    #[error("degenerate variance: {0}")]
    DegenerateVariance(String),

    #[error("collinear regressor after demeaning: {0}")]
    Collinear(String),

    #[error("zero benchmark denominator for variable {variable}, horizon {horizon}")]
    ZeroDenominator { variable: String, horizon: u32 },

    #[error("data beyond information set: requested {requested}, origin {origin}")]
    Lookahead { requested: Month, origin: Month },

    #[error("schema mismatch: {0}")]
    Schema(String),

    #[error("unknown model {name}; available: {available}")]
    UnknownModel { name: String, available: String },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub fn io(path: impl AsRef<std::path::Path>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.as_ref().display().to_string(),
            source,
        }
    }
}
