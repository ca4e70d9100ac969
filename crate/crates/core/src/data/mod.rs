//! Panel ingestion, stationarizing transforms, targets, factors and predictor sets.

pub mod factors;
pub mod panel;
pub mod predictors;
pub mod target;
pub mod transform;

pub use factors::{extract_factors, FactorSet};
pub use panel::{ingest_fredmd, ingest_reader, RawPanel};
pub use predictors::{assemble_predictors, build_design, DesignSpec, LagSources, PredictorInputs, PredictorSet, Preprocessor, Rotation};
pub use target::{build_named_target, build_target, stationary_own_series, TargetKind, TargetSeries};
pub use transform::{apply_tcode, stationarize};
