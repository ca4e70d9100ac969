//! Kernels and kernel ridge regression.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{column_means, spd_solve};
use crate::models::linear::check_inputs;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Kernel {
    Linear,
    /// `exp(−‖x − x'‖² / (2σ²))`
    Rbf { sigma: f64 },
}

impl Kernel {
    pub fn eval(&self, a: &[f64], b: &[f64]) -> f64 {
        match *self {
            Kernel::Linear => a.iter().zip(b).map(|(x, y)| x * y).sum(),
            Kernel::Rbf { sigma } => {
                let d2: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum();
                (-d2 / (2.0 * sigma * sigma)).exp()
            }
        }
    }

    fn check(&self) -> Result<()> {
        if let Kernel::Rbf { sigma } = *self {
            if !(sigma > 0.0 && sigma.is_finite()) {
                return Err(Error::Argument(format!("kernel width {sigma} must be positive")));
            }
        }
        Ok(())
    }

    /// Gram matrix `K(a_i, b_j)`.
    pub fn gram(&self, a: &DMatrix<f64>, b: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        self.check()?;
        let k = match *self {
            Kernel::Linear => a * b.transpose(),
            Kernel::Rbf { sigma } => rbf_from_sq_dist(&sq_distances(a, b), sigma),
        };
        if k.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("kernel matrix".into()));
        }
        Ok(k)
    }
}

/// Pairwise squared Euclidean distances between the rows of `a` and `b`.
pub fn sq_distances(a: &DMatrix<f64>, b: &DMatrix<f64>) -> DMatrix<f64> {
    let na: Vec<f64> = a.row_iter().map(|r| r.norm_squared()).collect();
    let nb: Vec<f64> = b.row_iter().map(|r| r.norm_squared()).collect();
    let mut d = a * b.transpose();
    for j in 0..d.ncols() {
        for i in 0..d.nrows() {
            d[(i, j)] = (na[i] + nb[j] - 2.0 * d[(i, j)]).max(0.0);
        }
    }
    d
}

pub fn rbf_from_sq_dist(d2: &DMatrix<f64>, sigma: f64) -> DMatrix<f64> {
    let c = -1.0 / (2.0 * sigma * sigma);
    d2.map(|v| (v * c).exp())
}

/// Fitted kernel ridge regression: `ŷ(x) = c + Σ_j α̂_j K(z_j, x)`.
#[derive(Debug, Clone, PartialEq)]
pub struct KrrModel {
    pub kernel: Kernel,
    pub lambda: f64,
    pub dual: Vec<f64>,
    /// Training rows (after centering for the linear kernel).
    pub train: DMatrix<f64>,
    pub column_mean: Vec<f64>,
    pub intercept: f64,
}

impl KrrModel {
    pub fn predict(&self, z_new: &DMatrix<f64>) -> Result<DVector<f64>> {
        let mut zc = z_new.clone();
        for (j, mut col) in zc.column_iter_mut().enumerate() {
            col.add_scalar_mut(-self.column_mean[j]);
        }
        let k = self.kernel.gram(&zc, &self.train)?;
        Ok((k * DVector::from_column_slice(&self.dual)).add_scalar(self.intercept))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KernelRidge {
    pub lambda: f64,
    pub kernel: Kernel,
    pub intercept: bool,
}

impl KernelRidge {
    pub fn new(lambda: f64, kernel: Kernel) -> Self {
        KernelRidge { lambda, kernel, intercept: true }
    }

    /// `α̂ = (K + λI)⁻¹ (y − ȳ)`. Columns are centered as well, which leaves the
    /// RBF kernel unchanged and makes the linear kernel match centered ridge.
    pub fn fit(&self, z: &DMatrix<f64>, y: &DVector<f64>) -> Result<KrrModel> {
        if !(self.lambda > 0.0) {
            return Err(Error::Argument(format!("kernel ridge penalty {} must be positive", self.lambda)));
        }
        check_inputs(z, y)?;
        let (train, column_mean, y_mean) = center_for_kernel(z, y, self.intercept);
        let mut k = self.kernel.gram(&train, &train)?;
        for i in 0..k.nrows() {
            k[(i, i)] += self.lambda;
        }
        let dual = spd_solve(k, &y.add_scalar(-y_mean))?;
        Ok(KrrModel {
            kernel: self.kernel,
            lambda: self.lambda,
            dual: dual.iter().copied().collect(),
            train,
            column_mean,
            intercept: y_mean,
        })
    }
}

fn center_for_kernel(z: &DMatrix<f64>, y: &DVector<f64>, intercept: bool) -> (DMatrix<f64>, Vec<f64>, f64) {
    if !intercept {
        return (z.clone(), vec![0.0; z.ncols()], 0.0);
    }
    let m = column_means(z);
    let mut zc = z.clone();
    for (j, mut col) in zc.column_iter_mut().enumerate() {
        col.add_scalar_mut(-m[j]);
    }
    (zc, m.iter().copied().collect(), y.mean())
}

pub fn fit_krr(z: &DMatrix<f64>, y: &DVector<f64>, lambda: f64, sigma: f64) -> Result<KrrModel> {
    KernelRidge::new(lambda, Kernel::Rbf { sigma }).fit(z, y)
}

pub fn predict_krr(model: &KrrModel, z_new: &DMatrix<f64>) -> Result<DVector<f64>> {
    model.predict(z_new)
}

/// Eigendecomposition of one training Gram matrix, reused across a penalty
/// ladder: `α̂(λ) = Q diag(1/(d + λ)) Q'(y − ȳ)`.
pub struct KrrPath {
    q: DMatrix<f64>,
    d: DVector<f64>,
    qty: DVector<f64>,
    y_mean: f64,
}

impl KrrPath {
    pub fn new(gram: DMatrix<f64>, y: &DVector<f64>, intercept: bool) -> Self {
        let y_mean = if intercept { y.mean() } else { 0.0 };
        let eig = gram.symmetric_eigen();
        let qty = eig.eigenvectors.transpose() * y.add_scalar(-y_mean);
        KrrPath { q: eig.eigenvectors, d: eig.eigenvalues, qty, y_mean }
    }

    /// Predictions for rows whose kernel against the training rows is `cross`,
    /// one column per penalty.
    pub fn predict(&self, cross: &DMatrix<f64>, lambdas: &[f64]) -> DMatrix<f64> {
        let kq = cross * &self.q;
        let mut out = DMatrix::zeros(cross.nrows(), lambdas.len());
        for (c, &l) in lambdas.iter().enumerate() {
            let w = DVector::from_fn(self.d.len(), |i, _| self.qty[i] / (self.d[i].max(0.0) + l));
            out.set_column(c, &(&kq * w).add_scalar(self.y_mean));
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::linear::{Ridge, RidgeMode};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn problem(t: usize, k: usize, seed: u64) -> (DMatrix<f64>, DVector<f64>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let z = DMatrix::from_fn(t, k, |_, _| rng.gen_range(-1.0f64..1.0));
        let y = DVector::from_fn(t, |i, _| (3.0 * z[(i, 0)]).sin() + rng.gen_range(-0.1..0.1));
        (z, y)
    }

    #[test]
    fn rbf_values() {
        let k = Kernel::Rbf { sigma: 2f64.sqrt() };
        assert_eq!(k.eval(&[0.7, -1.0], &[0.7, -1.0]), 1.0);
        assert!((k.eval(&[0.0], &[2.0]) - (-1f64).exp()).abs() < 1e-12);
        assert!((k.eval(&[0.0], &[2.0]) - 0.367879).abs() < 1e-6);
    }

    #[test]
    fn linear_kernel_is_dual_ridge() {
        for seed in 0..5 {
            let (z, y) = problem(30, 6, seed);
            for intercept in [false, true] {
                let krr = KernelRidge { lambda: 0.8, kernel: Kernel::Linear, intercept }.fit(&z, &y).unwrap();
                let rr = Ridge { lambda: 0.8, mode: RidgeMode::Dual, intercept }.fit(&z, &y).unwrap();
                let diff = (krr.predict(&z).unwrap() - rr.predict(&z)).abs().max();
                assert!(diff < 1e-8, "diff {diff}");
            }
        }
    }

    #[test]
    fn path_matches_direct_solves() {
        let (z, y) = problem(40, 3, 9);
        let (zt, _) = problem(10, 3, 10);
        let kern = Kernel::Rbf { sigma: 0.9 };
        let zc_mean = column_means(&z);
        let zc = crate::linalg::center_columns(&z, &zc_mean);
        let ztc = crate::linalg::center_columns(&zt, &zc_mean);
        let path = KrrPath::new(kern.gram(&zc, &zc).unwrap(), &y, true);
        let lambdas = [0.01, 0.1, 1.0];
        let preds = path.predict(&kern.gram(&ztc, &zc).unwrap(), &lambdas);
        for (c, &l) in lambdas.iter().enumerate() {
            let m = KernelRidge::new(l, kern).fit(&z, &y).unwrap();
            assert!((m.predict(&zt).unwrap() - preds.column(c)).abs().max() < 1e-8);
        }
    }

    #[test]
    fn rbf_fits_smooth_function() {
        let (z, y) = problem(80, 1, 11);
        let m = fit_krr(&z, &y, 1e-3, 0.5).unwrap();
        let r = &y - predict_krr(&m, &z).unwrap();
        assert!(r.norm_squared() / 80.0 < 0.01);
    }

    #[test]
    fn invalid_settings_rejected() {
        let (z, y) = problem(10, 2, 12);
        assert!(fit_krr(&z, &y, 0.0, 1.0).is_err());
        assert!(fit_krr(&z, &y, 1.0, 0.0).is_err());
    }
}
