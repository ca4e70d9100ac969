//! Least squares and ridge regression.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{collinear_columns, column_means, spd_solve};

/// `ŷ = intercept + z'β`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearModel {
    pub coef: Vec<f64>,
    pub intercept: f64,
    pub has_intercept: bool,
}

impl LinearModel {
    pub fn predict(&self, z: &DMatrix<f64>) -> DVector<f64> {
        let beta = DVector::from_column_slice(&self.coef);
        (z * beta).add_scalar(self.intercept)
    }

    pub fn predict_row(&self, z: &[f64]) -> f64 {
        self.intercept + z.iter().zip(&self.coef).map(|(a, b)| a * b).sum::<f64>()
    }

    /// Number of estimated parameters, intercept included.
    pub fn n_params(&self) -> usize {
        self.coef.len() + usize::from(self.has_intercept)
    }
}

/// Centered copies of `z` and `y` plus the means needed to restore the intercept.
pub(crate) struct Centered {
    pub z: DMatrix<f64>,
    pub y: DVector<f64>,
    pub z_mean: DVector<f64>,
    pub y_mean: f64,
}

pub(crate) fn center(z: &DMatrix<f64>, y: &DVector<f64>, intercept: bool) -> Centered {
    if !intercept {
        return Centered {
            z: z.clone(),
            y: y.clone(),
            z_mean: DVector::zeros(z.ncols()),
            y_mean: 0.0,
        };
    }
    let z_mean = column_means(z);
    let y_mean = y.mean();
    let mut zc = z.clone();
    for (j, mut col) in zc.column_iter_mut().enumerate() {
        col.add_scalar_mut(-z_mean[j]);
    }
    Centered { z: zc, y: y.add_scalar(-y_mean), z_mean, y_mean }
}

pub(crate) fn restore(c: &Centered, beta: DVector<f64>, intercept: bool) -> LinearModel {
    let b0 = c.y_mean - c.z_mean.dot(&beta);
    LinearModel { coef: beta.iter().copied().collect(), intercept: b0, has_intercept: intercept }
}

pub(crate) fn check_inputs(z: &DMatrix<f64>, y: &DVector<f64>) -> Result<()> {
    if z.nrows() != y.len() {
        return Err(Error::Argument(format!("design has {} rows, target {}", z.nrows(), y.len())));
    }
    if z.iter().chain(y.iter()).any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("design or target contains missing values".into()));
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Ols {
    pub intercept: bool,
}

impl Default for Ols {
    fn default() -> Self {
        Ols { intercept: true }
    }
}

impl Ols {
    pub fn fit(&self, z: &DMatrix<f64>, y: &DVector<f64>) -> Result<LinearModel> {
        check_inputs(z, y)?;
        let p = z.ncols() + usize::from(self.intercept);
        if z.nrows() <= p {
            return Err(Error::Argument(format!("{} rows for {} parameters", z.nrows(), p)));
        }
        let c = center(z, y, self.intercept);
        if z.ncols() == 0 {
            return Ok(restore(&c, DVector::zeros(0), self.intercept));
        }
        let bad = collinear_columns(&c.z, 1e-10);
        if !bad.is_empty() {
            return Err(Error::RankDeficient { columns: bad });
        }
        let qr = c.z.clone().qr();
        let qty = qr.q().transpose() * &c.y;
        let beta = qr
            .r()
            .solve_upper_triangular(&qty)
            .ok_or_else(|| Error::RankDeficient { columns: vec![] })?;
        Ok(restore(&c, beta, self.intercept))
    }
}

/// Least squares through the origin.
pub fn fit_ols(z: &DMatrix<f64>, y: &DVector<f64>) -> Result<LinearModel> {
    Ols { intercept: false }.fit(z, y)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum RidgeMode {
    /// `(Z'Z + λI)⁻¹ Z'y`
    Primal,
    /// `Z'(ZZ' + λI)⁻¹ y`
    Dual,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Ridge {
    pub lambda: f64,
    pub mode: RidgeMode,
    pub intercept: bool,
}

impl Ridge {
    pub fn new(lambda: f64) -> Self {
        Ridge { lambda, mode: RidgeMode::Primal, intercept: true }
    }

    pub fn fit(&self, z: &DMatrix<f64>, y: &DVector<f64>) -> Result<LinearModel> {
        if !(self.lambda >= 0.0) {
            return Err(Error::Argument(format!("ridge penalty {} must be non-negative", self.lambda)));
        }
        check_inputs(z, y)?;
        let c = center(z, y, self.intercept);
        let beta = match self.mode {
            RidgeMode::Primal => {
                let mut a = c.z.transpose() * &c.z;
                for i in 0..a.nrows() {
                    a[(i, i)] += self.lambda;
                }
                spd_solve(a, &(c.z.transpose() * &c.y))?
            }
            RidgeMode::Dual => {
                let mut g = &c.z * c.z.transpose();
                for i in 0..g.nrows() {
                    g[(i, i)] += self.lambda;
                }
                let a = spd_solve(g, &c.y)?;
                c.z.transpose() * a
            }
        };
        Ok(restore(&c, beta, self.intercept))
    }
}

/// Ridge through the origin.
pub fn fit_ridge(z: &DMatrix<f64>, y: &DVector<f64>, lambda: f64, mode: RidgeMode) -> Result<LinearModel> {
    Ridge { lambda, mode, intercept: false }.fit(z, y)
}

/// One SVD of the centered design, reused for every penalty on a ladder:
/// `β(λ) = V diag(s / (s² + λ)) U'y`.
pub struct RidgePath {
    centered: Centered,
    v: DMatrix<f64>,
    s: DVector<f64>,
    uty: DVector<f64>,
    intercept: bool,
}

impl RidgePath {
    pub fn new(z: &DMatrix<f64>, y: &DVector<f64>, intercept: bool) -> Result<Self> {
        check_inputs(z, y)?;
        let centered = center(z, y, intercept);
        let svd = centered.z.clone().svd(true, true);
        let u = svd.u.expect("svd computed with u");
        let v = svd.v_t.expect("svd computed with v").transpose();
        let uty = u.transpose() * &centered.y;
        Ok(RidgePath { centered, v, s: svd.singular_values, uty, intercept })
    }

    pub fn fit(&self, lambda: f64) -> Result<LinearModel> {
        if !(lambda >= 0.0) {
            return Err(Error::Argument(format!("ridge penalty {lambda} must be non-negative")));
        }
        let smax = self.s.max();
        let w = DVector::from_fn(self.s.len(), |i, _| {
            let s = self.s[i];
            if s <= 1e-12 * smax.max(1e-300) {
                0.0
            } else {
                s * self.uty[i] / (s * s + lambda)
            }
        });
        Ok(restore(&self.centered, &self.v * w, self.intercept))
    }
}
