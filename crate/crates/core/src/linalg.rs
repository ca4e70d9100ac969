//! Small dense linear-algebra helpers shared by the estimators.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Per-column location/scale captured on a training sample.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardization {
    pub mean: Vec<f64>,
    pub scale: Vec<f64>,
}

impl Standardization {
    /// Columns with zero spread keep scale 1 so they map to a constant zero column.
    pub fn fit(x: &DMatrix<f64>) -> Self {
        let n = x.nrows().max(1) as f64;
        let mut mean = Vec::with_capacity(x.ncols());
        let mut scale = Vec::with_capacity(x.ncols());
        for col in x.column_iter() {
            let m = col.sum() / n;
            let var = col.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / n;
            let sd = var.sqrt();
            mean.push(m);
            scale.push(if sd > 1e-12 * (1.0 + m.abs()) { sd } else { 1.0 });
        }
        Standardization { mean, scale }
    }

    pub fn identity(ncols: usize) -> Self {
        Standardization {
            mean: vec![0.0; ncols],
            scale: vec![1.0; ncols],
        }
    }

    pub fn apply(&self, x: &DMatrix<f64>) -> DMatrix<f64> {
        let mut out = x.clone();
        self.apply_in_place(&mut out);
        out
    }

    pub fn apply_in_place(&self, x: &mut DMatrix<f64>) {
        for (j, mut col) in x.column_iter_mut().enumerate() {
            let (m, s) = (self.mean[j], self.scale[j]);
            for v in col.iter_mut() {
                *v = (*v - m) / s;
            }
        }
    }

    pub fn apply_row(&self, row: &mut [f64]) {
        for (j, v) in row.iter_mut().enumerate() {
            *v = (*v - self.mean[j]) / self.scale[j];
        }
    }
}

/// Column means of `x`.
pub fn column_means(x: &DMatrix<f64>) -> DVector<f64> {
    let n = x.nrows().max(1) as f64;
    DVector::from_iterator(x.ncols(), x.column_iter().map(|c| c.sum() / n))
}

/// Subtract `means` from every row of `x`.
pub fn center_columns(x: &DMatrix<f64>, means: &DVector<f64>) -> DMatrix<f64> {
    let mut out = x.clone();
    for (j, mut col) in out.column_iter_mut().enumerate() {
        col.add_scalar_mut(-means[j]);
    }
    out
}

pub fn mean(v: &[f64]) -> f64 {
    if v.is_empty() {
        return f64::NAN;
    }
    v.iter().sum::<f64>() / v.len() as f64
}

pub fn variance(v: &[f64]) -> f64 {
    let m = mean(v);
    v.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / v.len() as f64
}

/// Solve `a x = b` for symmetric positive definite `a`, falling back to an
/// SVD pseudo-solve when the Cholesky factorization fails.
pub fn spd_solve(a: DMatrix<f64>, b: &DVector<f64>) -> Result<DVector<f64>> {
    match a.clone().cholesky() {
        Some(ch) => Ok(ch.solve(b)),
        None => {
            let svd = a.svd(true, true);
            let tol = svd.singular_values.max() * 1e-12 * svd.singular_values.len() as f64;
            svd.solve(b, tol)
                .map_err(|e| Error::NonFinite(format!("pseudo-solve failed: {e}")))
        }
    }
}

/// Select rows of `x` by index.
pub fn select_rows(x: &DMatrix<f64>, rows: &[usize]) -> DMatrix<f64> {
    DMatrix::from_fn(rows.len(), x.ncols(), |i, j| x[(rows[i], j)])
}

pub fn select_entries(v: &DVector<f64>, rows: &[usize]) -> DVector<f64> {
    DVector::from_iterator(rows.len(), rows.iter().map(|&i| v[i]))
}

/// Indices of columns that are (numerically) linear combinations of earlier
/// columns, found by modified Gram-Schmidt with one re-orthogonalization pass.
pub fn collinear_columns(x: &DMatrix<f64>, rel_tol: f64) -> Vec<usize> {
    let mut basis: Vec<DVector<f64>> = Vec::new();
    let mut bad = Vec::new();
    for (j, col) in x.column_iter().enumerate() {
        let orig = col.norm();
        let mut v = col.clone_owned();
        for _ in 0..2 {
            for q in &basis {
                let p = q.dot(&v);
                v.axpy(-p, q, 1.0);
            }
        }
        let nrm = v.norm();
        if orig == 0.0 || nrm <= rel_tol * orig.max(1e-300) {
            bad.push(j);
        } else {
            basis.push(v / nrm);
        }
    }
    bad
}
