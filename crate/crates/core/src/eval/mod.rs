//! Evaluation econometrics: loss tables, equal-accuracy tests, model
//! confidence sets and feature-treatment regressions.

pub mod dm;
pub mod fluctuation;
pub mod hac;
pub mod mcs;
pub mod r2;
pub mod recession;
pub mod synthetic;
pub mod table;
pub mod treatment;

pub use dm::{dm_test, dm_test_with, Auxiliary, TestResult};
pub use fluctuation::{fluctuation_critical_value, fluctuation_test, FluctuationPath};
pub use hac::{classical_covariance, hac_covariance, newey_west_bandwidth, Bandwidth};
pub use mcs::{model_confidence_set, LossMatrix, McsOptions, McsResult};
pub use r2::{benchmark_denominators, pseudo_r2, to_percent, ValuePanel};
pub use recession::RecessionCalendar;
pub use table::{appendix_tables, relative_rmspe_table, RmspeTable, TableOptions, VariableTable};
pub use treatment::{
    demean_within, heterogeneity_regression, treatment_regression, EvalRegressionResult, Feature, FeatureDummies,
    Interaction, RegressionSpec,
};
