//! The model roster: each entry fixes the function class, shrinkage scheme,
//! hyperparameter selection method and in-sample loss.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::data::predictors::Rotation;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum GClass {
    Linear,
    KernelRbf,
    TreeEnsemble,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Shrinkage {
    None,
    Ridge,
    Lasso,
    ElasticNet,
    Pca,
    RidgePca,
    RidgePcr,
    LassoPca,
    LassoPcr,
    ElasticNetPca,
    ElasticNetPcr,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Tuner {
    Aic,
    Bic,
    PoosCv,
    KFoldCv,
}

impl Tuner {
    pub fn label(&self) -> &'static str {
        match self {
            Tuner::Aic => "AIC",
            Tuner::Bic => "BIC",
            Tuner::PoosCv => "POOS-CV",
            Tuner::KFoldCv => "K-fold",
        }
    }

    pub fn is_cv(&self) -> bool {
        matches!(self, Tuner::PoosCv | Tuner::KFoldCv)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Loss {
    Quadratic,
    EpsInsensitive,
}

/// Which predictor structure grid a model searches.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Environment {
    /// Own lags only (`p_y`).
    DataPoor,
    /// Own lags plus `K` factors (`p_y`, `p_f`, `K`).
    Ardi,
    /// Elastic-net rotations over the whole panel (`p_y`, `p_f`).
    Rotated(Rotation),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Estimator {
    Ols,
    Ridge,
    /// `None` cross-validates the mixing weight.
    ElasticNet { alpha: Option<f64> },
    KernelRidge,
    RandomForest,
    SvrLinear,
    SvrRbf,
}

/// Treatment indicators used by the evaluation regressions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct FeatureTags {
    /// Nonlinear function class.
    pub nl: bool,
    /// Alternative shrinkage (the elastic-net rotations).
    pub sh: bool,
    /// Hyperparameters chosen by cross-validation.
    pub cv: bool,
    /// ε-insensitive in-sample loss.
    pub lf: bool,
    /// Data-rich predictor set.
    pub x: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub name: String,
    pub g_class: GClass,
    pub shrinkage: Shrinkage,
    pub rotation: Rotation,
    pub environment: Environment,
    pub estimator: Estimator,
    pub tuner: Tuner,
    pub loss: Loss,
    pub tags: FeatureTags,
}

impl fmt::Display for ModelSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.name)
    }
}

impl ModelSpec {
    fn build(base: &str, environment: Environment, estimator: Estimator, tuner: Tuner) -> ModelSpec {
        let rotation = match environment {
            Environment::Rotated(r) => r,
            _ => Rotation::None,
        };
        let data_rich = environment != Environment::DataPoor;
        let g_class = match estimator {
            Estimator::KernelRidge | Estimator::SvrRbf => GClass::KernelRbf,
            Estimator::RandomForest => GClass::TreeEnsemble,
            _ => GClass::Linear,
        };
        let shrinkage = match (environment, estimator) {
            (Environment::DataPoor, Estimator::Ridge | Estimator::KernelRidge) => Shrinkage::Ridge,
            (Environment::DataPoor, _) => Shrinkage::None,
            (Environment::Ardi, Estimator::Ridge) => Shrinkage::RidgePca,
            (Environment::Ardi, Estimator::KernelRidge) => Shrinkage::RidgePcr,
            (Environment::Ardi, _) => Shrinkage::Pca,
            (Environment::Rotated(r), Estimator::ElasticNet { alpha }) => {
                let kind = match alpha {
                    None => 0,
                    Some(a) if a == 1.0 => 1,
                    Some(_) => 2,
                };
                match (r, kind) {
                    (Rotation::B2, 0) => Shrinkage::ElasticNetPca,
                    (Rotation::B2, 1) => Shrinkage::LassoPca,
                    (Rotation::B2, _) => Shrinkage::RidgePca,
                    (Rotation::B3, 0) => Shrinkage::ElasticNetPcr,
                    (Rotation::B3, 1) => Shrinkage::LassoPcr,
                    (Rotation::B3, _) => Shrinkage::RidgePcr,
                    (_, 0) => Shrinkage::ElasticNet,
                    (_, 1) => Shrinkage::Lasso,
                    (_, _) => Shrinkage::Ridge,
                }
            }
            (Environment::Rotated(_), _) => Shrinkage::None,
        };
        let loss = match estimator {
            Estimator::SvrLinear | Estimator::SvrRbf => Loss::EpsInsensitive,
            _ => Loss::Quadratic,
        };
        ModelSpec {
            name: format!("{base},{}", tuner.label()),
            g_class,
            shrinkage,
            rotation,
            environment,
            estimator,
            tuner,
            loss,
            tags: FeatureTags {
                nl: g_class != GClass::Linear,
                sh: matches!(environment, Environment::Rotated(_)),
                cv: tuner.is_cv(),
                lf: loss == Loss::EpsInsensitive,
                x: data_rich,
            },
        }
    }

    /// Information criteria need a likelihood, i.e. an OLS fit.
    pub fn supports_ic(&self) -> bool {
        self.estimator == Estimator::Ols
    }

    pub fn is_stochastic(&self) -> bool {
        self.tuner == Tuner::KFoldCv || self.estimator == Estimator::RandomForest
    }
}

/// All 46 models, in table order.
pub fn roster() -> Vec<ModelSpec> {
    use Environment::*;
    use Estimator::*;
    use Tuner::*;
    let cv = [PoosCv, KFoldCv];
    let mut out = Vec::new();
    for t in [Bic, Aic, PoosCv, KFoldCv] {
        out.push(ModelSpec::build("AR", DataPoor, Ols, t));
    }
    for (base, est) in [("RRAR", Ridge), ("RFAR", RandomForest), ("KRR-AR", KernelRidge)] {
        for t in cv {
            out.push(ModelSpec::build(base, DataPoor, est, t));
        }
    }
    for (base, est) in [("SVR-AR,Lin", SvrLinear), ("SVR-AR,RBF", SvrRbf)] {
        for t in cv {
            out.push(ModelSpec::build(base, DataPoor, est, t));
        }
    }
    for t in [Bic, Aic, PoosCv, KFoldCv] {
        out.push(ModelSpec::build("ARDI", Ardi, Ols, t));
    }
    for (base, est) in [("RRARDI", Ridge), ("RFARDI", RandomForest), ("KRR-ARDI", KernelRidge)] {
        for t in cv {
            out.push(ModelSpec::build(base, Ardi, est, t));
        }
    }
    for (b, rot) in [("B1", Rotation::B1), ("B2", Rotation::B2), ("B3", Rotation::B3)] {
        for (label, alpha) in [("hat", None), ("1", Some(1.0)), ("0", Some(0.0))] {
            for t in cv {
                let base = format!("({b},alpha={label})");
                out.push(ModelSpec::build(&base, Rotated(rot), ElasticNet { alpha }, t));
            }
        }
    }
    for (base, est) in [("SVR-ARDI,Lin", SvrLinear), ("SVR-ARDI,RBF", SvrRbf)] {
        for t in cv {
            out.push(ModelSpec::build(base, Ardi, est, t));
        }
    }
    out
}

/// Canonical form of a model name: accepts the table's spelling variants
/// (`KRRARDI,K-fold`, `KRR,ARDI,K-fold`, `(B_1,\alpha=\hat{\alpha})`, `α̂`, ...).
pub fn canonical_name(name: &str) -> String {
    let mut s: String = name.chars().filter(|c| !c.is_whitespace()).collect();
    for (from, to) in [
        ("$", ""),
        ("\\hat{\\alpha}", "hat"),
        ("\\alpha", "alpha"),
        ("α̂", "hat"),
        ("α", "alpha"),
        ("B_", "B"),
        ("{", ""),
        ("}", ""),
        ("alpha=alphahat", "alpha=hat"),
        ("POOS_CV", "POOS-CV"),
        ("POOSCV", "POOS-CV"),
        ("K-foldCV", "K-fold"),
        ("KFold", "K-fold"),
        ("Kfold", "K-fold"),
    ] {
        s = s.replace(from, to);
    }
    for (from, to) in [("KRRARDI", "KRR-ARDI"), ("KRR,ARDI", "KRR-ARDI"), ("KRRAR,", "KRR-AR,"), ("KRR,AR,", "KRR-AR,")] {
        if s.starts_with(from) {
            s = format!("{to}{}", &s[from.len()..]);
        }
    }
    s
}

pub fn find_model(name: &str) -> Result<ModelSpec> {
    let want = canonical_name(name);
    let all = roster();
    all.iter()
        .find(|m| m.name == want)
        .cloned()
        .ok_or_else(|| Error::UnknownModel {
            name: name.to_string(),
            available: all.iter().map(|m| m.name.as_str()).collect::<Vec<_>>().join("; "),
        })
}
