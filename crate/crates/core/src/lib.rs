//! Macroeconomic forecasting horse race: data pipeline, model zoo, tuning,
//! pseudo-out-of-sample harness and evaluation econometrics.

pub mod data;
pub mod date;
pub mod error;
pub mod eval;
pub mod harness;
pub mod linalg;
pub mod models;
pub mod seed;
pub mod tuning;

pub use date::Month;
pub use error::{Error, Result};
