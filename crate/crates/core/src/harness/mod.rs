//! Pseudo-out-of-sample engine: configuration, data preparation, run loop and
//! forecast persistence.

pub mod config;
pub mod context;
pub mod dataset;
pub mod run;
pub mod store;
pub mod synthetic;

pub use config::{ExperimentConfig, TargetOverride, DATA_DIR_ENV};
pub use context::{ContextCache, ContextNeeds, FeatureContext, VariableSource};
pub use dataset::{default_target_kind, Dataset, VariableData};
pub use run::{config_hash, manifest_path, run_experiment, run_experiment_with_jobs, ModelCounts, RunManifest, RunReport};
pub use store::{compute_error_panel, ErrorPanel, ForecastRecord, ForecastStore, LossEntry, LossKind, RecordKey};
pub use synthetic::synthetic_panel;
