//! Estimators: least squares, ridge, elastic net, kernel ridge, random forest and ε-SVR.

pub mod elastic_net;
pub mod forest;
pub mod kernel;
pub mod linear;
pub mod svr;

pub use elastic_net::{fit_elastic_net, stationarity_violation, ElasticNet};
pub use forest::{fit_random_forest, ForestModel, RandomForest};
pub use kernel::{fit_krr, predict_krr, Kernel, KernelRidge, KrrModel, KrrPath};
pub use linear::{fit_ols, fit_ridge, LinearModel, Ols, Ridge, RidgeMode, RidgePath};
pub use svr::{fit_svr, Svr, SvrModel};
pub mod pipeline;
pub mod spec;

pub use pipeline::{fit_estimator, fit_predict_many, FittedModel, FittedPipeline, HyperPoint, ModelSettings};
pub use spec::{canonical_name, find_model, roster, Environment, Estimator, FeatureTags, GClass, Loss, ModelSpec, Shrinkage, Tuner};
