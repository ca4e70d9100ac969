//! Hyperparameter points, fitted models, and the preprocessing + estimator pipeline.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::data::predictors::{DesignSpec, Preprocessor, Rotation};
use crate::error::{Error, Result};
use crate::models::elastic_net::ElasticNet;
use crate::models::forest::{ForestModel, RandomForest};
use crate::models::kernel::{Kernel, KernelRidge, KrrModel, KrrPath};
use crate::models::linear::{LinearModel, Ols, Ridge, RidgeMode, RidgePath};
use crate::models::spec::{Environment, Estimator, Tuner};
use crate::models::svr::{Svr, SvrModel};
use crate::tuning::criteria::{score_ic, IcFit};

/// One point of a model's hyperparameter space.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HyperPoint {
    pub p_y: usize,
    pub p_f: usize,
    pub k: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambda: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sigma: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub c: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub epsilon: Option<f64>,
}

impl HyperPoint {
    pub fn structure(p_y: usize, p_f: usize, k: usize) -> Self {
        HyperPoint { p_y, p_f, k, lambda: None, alpha: None, sigma: None, c: None, epsilon: None }
    }

    pub fn design(&self, env: Environment) -> DesignSpec {
        match env {
            Environment::DataPoor => DesignSpec::data_poor(self.p_y),
            Environment::Ardi => DesignSpec::ardi(self.p_y, self.p_f, self.k),
            Environment::Rotated(r) => DesignSpec { p_y: self.p_y, p_f: self.p_f, n_factors: 0, rotation: r },
        }
    }

    /// Same structure, continuous values taken from `cont`.
    pub fn with(&self, cont: &HyperPoint) -> Self {
        HyperPoint { p_y: self.p_y, p_f: self.p_f, k: self.k, ..*cont }
    }
}

/// Knobs that are not tuned.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ModelSettings {
    pub n_trees: usize,
    /// Trees per forest while cross-validating.
    pub cv_trees: usize,
    pub mtry_frac: f64,
    pub min_leaf: usize,
    pub svr_tol: f64,
    pub svr_max_iter: usize,
    pub en_tol: f64,
    pub en_max_sweeps: usize,
}

impl Default for ModelSettings {
    fn default() -> Self {
        ModelSettings {
            n_trees: 500,
            cv_trees: 100,
            mtry_frac: 1.0 / 3.0,
            min_leaf: 5,
            svr_tol: 1e-6,
            svr_max_iter: 20_000_000,
            en_tol: 1e-10,
            en_max_sweeps: 100_000,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum FittedModel {
    Linear(LinearModel),
    Kernel(KrrModel),
    Forest(ForestModel),
    Svr(SvrModel),
}

impl FittedModel {
    pub fn predict(&self, z: &DMatrix<f64>) -> Result<DVector<f64>> {
        match self {
            FittedModel::Linear(m) => Ok(m.predict(z)),
            FittedModel::Kernel(m) => m.predict(z),
            FittedModel::Forest(m) => Ok(m.predict(z)),
            FittedModel::Svr(m) => m.predict(z),
        }
    }

    pub fn family(&self) -> &'static str {
        match self {
            FittedModel::Linear(_) => "linear",
            FittedModel::Kernel(_) => "kernel ridge",
            FittedModel::Forest(_) => "random forest",
            FittedModel::Svr(_) => "support vector regression",
        }
    }

    /// Information criterion of an in-sample least-squares fit on `(z, y)`.
    pub fn information_criterion(&self, z: &DMatrix<f64>, y: &DVector<f64>, criterion: Tuner) -> Result<f64> {
        match self {
            FittedModel::Linear(m) => {
                let r = y - m.predict(z);
                score_ic(&IcFit { ssr: r.norm_squared(), n_obs: y.len(), n_params: m.n_params() }, criterion)
            }
            other => Err(Error::UnsupportedCriterion {
                criterion: format!("{criterion:?}"),
                family: other.family().into(),
            }),
        }
    }
}

fn need(v: Option<f64>, what: &str) -> Result<f64> {
    v.ok_or_else(|| Error::Argument(format!("hyperparameter {what} not set")))
}

/// Fit `est` on an already preprocessed design.
pub fn fit_estimator(
    est: Estimator,
    hp: &HyperPoint,
    z: &DMatrix<f64>,
    y: &DVector<f64>,
    settings: &ModelSettings,
    n_trees: usize,
    seed: u64,
) -> Result<FittedModel> {
    Ok(match est {
        Estimator::Ols => FittedModel::Linear(Ols::default().fit(z, y)?),
        Estimator::Ridge => FittedModel::Linear(
            Ridge { lambda: need(hp.lambda, "lambda")?, mode: ridge_mode(z), intercept: true }.fit(z, y)?,
        ),
        Estimator::ElasticNet { .. } => {
            let alpha = need(hp.alpha, "alpha")?;
            let lambda = need(hp.lambda, "lambda")?;
            if alpha == 0.0 {
                FittedModel::Linear(Ridge { lambda, mode: ridge_mode(z), intercept: true }.fit(z, y)?)
            } else {
                let en = ElasticNet { tol: settings.en_tol, max_sweeps: settings.en_max_sweeps, ..ElasticNet::new(lambda, alpha) };
                FittedModel::Linear(en.fit(z, y)?)
            }
        }
        Estimator::KernelRidge => FittedModel::Kernel(
            KernelRidge::new(need(hp.lambda, "lambda")?, Kernel::Rbf { sigma: need(hp.sigma, "sigma")? }).fit(z, y)?,
        ),
        Estimator::RandomForest => FittedModel::Forest(
            RandomForest {
                n_trees,
                mtry_frac: settings.mtry_frac,
                min_leaf: settings.min_leaf,
                max_depth: None,
                bootstrap: true,
                seed,
            }
            .fit(z, y)?,
        ),
        Estimator::SvrLinear | Estimator::SvrRbf => {
            let kernel = if est == Estimator::SvrRbf {
                Kernel::Rbf { sigma: need(hp.sigma, "sigma")? }
            } else {
                Kernel::Linear
            };
            let svr = Svr {
                kernel,
                c: need(hp.c, "C")?,
                epsilon: need(hp.epsilon, "epsilon")?,
                tol: settings.svr_tol,
                max_iter: settings.svr_max_iter,
            };
            FittedModel::Svr(svr.fit(z, y)?)
        }
    })
}

fn ridge_mode(z: &DMatrix<f64>) -> RidgeMode {
    if z.ncols() > z.nrows() {
        RidgeMode::Dual
    } else {
        RidgeMode::Primal
    }
}

/// Predictions on `z_test` for every continuous point in `cont`, sharing
/// factorizations across penalty ladders where the estimator allows it.
/// `z_train` and `z_test` are already preprocessed.
pub fn fit_predict_many(
    est: Estimator,
    cont: &[HyperPoint],
    z_train: &DMatrix<f64>,
    y_train: &DVector<f64>,
    z_test: &DMatrix<f64>,
    settings: &ModelSettings,
    seed: u64,
) -> Result<Vec<DVector<f64>>> {
    match est {
        Estimator::Ridge => {
            let path = RidgePath::new(z_train, y_train, true)?;
            cont.iter().map(|hp| Ok(path.fit(need(hp.lambda, "lambda")?)?.predict(z_test))).collect()
        }
        Estimator::ElasticNet { .. } => {
            let mut out: Vec<Option<DVector<f64>>> = vec![None; cont.len()];
            let mut alphas: Vec<f64> = cont.iter().filter_map(|hp| hp.alpha).collect();
            alphas.sort_by(f64::total_cmp);
            alphas.dedup();
            let mut ridge: Option<RidgePath> = None;
            for a in alphas {
                let idx: Vec<usize> = (0..cont.len()).filter(|&i| cont[i].alpha == Some(a)).collect();
                let lambdas: Vec<f64> = idx.iter().map(|&i| need(cont[i].lambda, "lambda")).collect::<Result<_>>()?;
                if a == 0.0 {
                    if ridge.is_none() {
                        ridge = Some(RidgePath::new(z_train, y_train, true)?);
                    }
                    let path = ridge.as_ref().expect("ridge path built");
                    for (&i, &l) in idx.iter().zip(&lambdas) {
                        out[i] = Some(path.fit(l)?.predict(z_test));
                    }
                } else {
                    let en = ElasticNet { tol: settings.en_tol, max_sweeps: settings.en_max_sweeps, ..ElasticNet::new(0.0, a) };
                    for (&i, m) in idx.iter().zip(en.fit_path(z_train, y_train, &lambdas)?) {
                        out[i] = Some(m.predict(z_test));
                    }
                }
            }
            out.into_iter()
                .map(|o| o.ok_or_else(|| Error::Argument("elastic-net point without alpha".into())))
                .collect()
        }
        Estimator::KernelRidge => {
            let mut out: Vec<Option<DVector<f64>>> = vec![None; cont.len()];
            let mut sigmas: Vec<f64> = cont.iter().filter_map(|hp| hp.sigma).collect();
            sigmas.sort_by(f64::total_cmp);
            sigmas.dedup();
            let means = crate::linalg::column_means(z_train);
            let ztr = crate::linalg::center_columns(z_train, &means);
            let zte = crate::linalg::center_columns(z_test, &means);
            let d_train = crate::models::kernel::sq_distances(&ztr, &ztr);
            let d_cross = crate::models::kernel::sq_distances(&zte, &ztr);
            for s in sigmas {
                let idx: Vec<usize> = (0..cont.len()).filter(|&i| cont[i].sigma == Some(s)).collect();
                let lambdas: Vec<f64> = idx.iter().map(|&i| need(cont[i].lambda, "lambda")).collect::<Result<_>>()?;
                let gram = crate::models::kernel::rbf_from_sq_dist(&d_train, s);
                let cross = crate::models::kernel::rbf_from_sq_dist(&d_cross, s);
                let preds = KrrPath::new(gram, y_train, true).predict(&cross, &lambdas);
                for (c, &i) in idx.iter().enumerate() {
                    out[i] = Some(preds.column(c).into_owned());
                }
            }
            out.into_iter()
                .map(|o| o.ok_or_else(|| Error::Argument("kernel ridge point without sigma".into())))
                .collect()
        }
        _ => {
            let n_trees = settings.cv_trees;
            cont.iter()
                .map(|hp| fit_estimator(est, hp, z_train, y_train, settings, n_trees, seed)?.predict(z_test))
                .collect()
        }
    }
}

/// Preprocessing plus estimator, fitted on raw design rows.
#[derive(Debug, Clone, PartialEq)]
pub struct FittedPipeline {
    pub design: DesignSpec,
    pub preprocessor: Preprocessor,
    pub model: FittedModel,
    pub hyper: HyperPoint,
    pub seed: u64,
}

impl FittedPipeline {
    pub fn fit(
        env: Environment,
        est: Estimator,
        hp: &HyperPoint,
        raw_train: &DMatrix<f64>,
        y: &DVector<f64>,
        settings: &ModelSettings,
        seed: u64,
    ) -> Result<Self> {
        let design = hp.design(env);
        let preprocessor = Preprocessor::fit(raw_train, design.rotation == Rotation::B3)?;
        let z = preprocessor.transform(raw_train);
        let model = fit_estimator(est, hp, &z, y, settings, settings.n_trees, seed)?;
        Ok(FittedPipeline { design, preprocessor, model, hyper: *hp, seed })
    }

    pub fn predict_raw(&self, raw: &DMatrix<f64>) -> Result<DVector<f64>> {
        self.model.predict(&self.preprocessor.transform(raw))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn problem(t: usize, k: usize, seed: u64) -> (DMatrix<f64>, DVector<f64>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let z = DMatrix::from_fn(t, k, |_, _| rng.gen_range(-1.0f64..1.0));
        let y = DVector::from_fn(t, |i, _| z[(i, 0)] + 0.5 * z[(i, 1)].powi(2) + rng.gen_range(-0.2..0.2));
        (z, y)
    }

    fn pt(lambda: Option<f64>, alpha: Option<f64>, sigma: Option<f64>) -> HyperPoint {
        HyperPoint { lambda, alpha, sigma, ..HyperPoint::structure(1, 0, 0) }
    }

    #[test]
    fn batched_predictions_match_single_fits() {
        let (z, y) = problem(60, 4, 1);
        let (zt, _) = problem(15, 4, 2);
        let s = ModelSettings::default();
        let cases: Vec<(Estimator, Vec<HyperPoint>)> = vec![
            (Estimator::Ridge, vec![pt(Some(0.1), None, None), pt(Some(10.0), None, None)]),
            (
                Estimator::ElasticNet { alpha: None },
                vec![pt(Some(0.5), Some(0.5), None), pt(Some(2.0), Some(1.0), None), pt(Some(3.0), Some(0.0), None)],
            ),
            (Estimator::KernelRidge, vec![pt(Some(0.1), None, Some(1.0)), pt(Some(1.0), None, Some(2.0))]),
        ];
        for (est, cont) in cases {
            let many = fit_predict_many(est, &cont, &z, &y, &zt, &s, 0).unwrap();
            for (hp, p) in cont.iter().zip(&many) {
                let one = fit_estimator(est, hp, &z, &y, &s, 10, 0).unwrap().predict(&zt).unwrap();
                assert!((one - p).abs().max() < 1e-7, "{est:?}");
            }
        }
    }

    #[test]
    fn information_criteria_refused_for_nonlinear_fits() {
        let (z, y) = problem(40, 2, 3);
        let s = ModelSettings::default();
        let f = fit_estimator(Estimator::KernelRidge, &pt(Some(1.0), None, Some(1.0)), &z, &y, &s, 1, 0).unwrap();
        assert!(matches!(f.information_criterion(&z, &y, Tuner::Bic), Err(Error::UnsupportedCriterion { .. })));
        let f = fit_estimator(Estimator::Ols, &pt(None, None, None), &z, &y, &s, 1, 0).unwrap();
        assert!(f.information_criterion(&z, &y, Tuner::Aic).unwrap().is_finite());
    }

    #[test]
    fn missing_hyperparameter_is_an_argument_error() {
        let (z, y) = problem(20, 2, 4);
        let s = ModelSettings::default();
        assert!(fit_estimator(Estimator::Ridge, &pt(None, None, None), &z, &y, &s, 1, 0).is_err());
    }
}
