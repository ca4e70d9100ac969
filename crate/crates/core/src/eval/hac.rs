//! Bartlett-kernel long-run covariances and HAC sandwich estimators.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Truncation lag rule.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
pub enum Bandwidth {
    #[default]
    NeweyWest,
    Fixed(usize),
}

impl Bandwidth {
    pub fn resolve(self, t: usize) -> usize {
        match self {
            Bandwidth::NeweyWest => newey_west_bandwidth(t),
            Bandwidth::Fixed(l) => l,
        }
    }
}

/// ⌊4 (T/100)^{2/9}⌋
pub fn newey_west_bandwidth(t: usize) -> usize {
    (4.0 * (t as f64 / 100.0).powf(2.0 / 9.0)).floor() as usize
}

pub fn bartlett_weight(lag: usize, bandwidth: usize) -> f64 {
    1.0 - lag as f64 / (bandwidth as f64 + 1.0)
}

/// Long-run variance of a scalar series around its mean, normalized by T.
pub fn long_run_variance(d: &[f64], bandwidth: usize) -> f64 {
    let t = d.len();
    let m = d.iter().sum::<f64>() / t as f64;
    let c: Vec<f64> = d.iter().map(|v| v - m).collect();
    let gamma = |l: usize| (l..t).map(|i| c[i] * c[i - l]).sum::<f64>() / t as f64;
    let mut s = gamma(0);
    for l in 1..=bandwidth.min(t.saturating_sub(1)) {
        s += 2.0 * bartlett_weight(l, bandwidth) * gamma(l);
    }
    s
}

/// Σ_t g_t g_t' + Σ_l w_l Σ_t (g_t g_{t−l}' + g_{t−l} g_t'), rows of `g` in time order.
pub fn long_run_sum(g: &DMatrix<f64>, bandwidth: usize) -> DMatrix<f64> {
    let (t, k) = g.shape();
    let mut s = g.transpose() * g;
    for l in 1..=bandwidth.min(t.saturating_sub(1)) {
        let w = bartlett_weight(l, bandwidth);
        let lead = g.rows(l, t - l);
        let lag = g.rows(0, t - l);
        let gl = lead.transpose() * lag;
        s += (&gl + gl.transpose()) * w;
    }
    debug_assert_eq!(s.shape(), (k, k));
    s
}

/// Symmetrize and floor negative eigenvalues at zero.
pub fn repair_psd(m: DMatrix<f64>) -> DMatrix<f64> {
    let sym = (&m + m.transpose()) * 0.5;
    let eig = sym.clone().symmetric_eigen();
    let top = eig.eigenvalues.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    let min = eig.eigenvalues.iter().copied().fold(f64::INFINITY, f64::min);
    if min >= -1e-12 * top.max(f64::MIN_POSITIVE) {
        return sym;
    }
    log::warn!("covariance not positive semidefinite (min eigenvalue {min:.3e}); flooring at zero");
    let floored = eig.eigenvalues.map(|v| v.max(0.0));
    &eig.eigenvectors * DMatrix::from_diagonal(&floored) * eig.eigenvectors.transpose()
}

fn xtx_inverse(x: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let xtx = x.transpose() * x;
    xtx.cholesky()
        .map(|c| c.inverse())
        .ok_or_else(|| Error::RankDeficient { columns: crate::linalg::collinear_columns(x, 1e-10) })
}

/// HAC sandwich for OLS with regressors `x` and residuals `u`; `time[i]` is
/// the period of observation i (scores are summed within a period before the
/// Bartlett weighting). `None` means one observation per period, in order.
pub fn hac_covariance_by_time(
    x: &DMatrix<f64>,
    u: &DVector<f64>,
    time: Option<(&[usize], usize)>,
    bandwidth: usize,
) -> Result<DMatrix<f64>> {
    let (n, k) = x.shape();
    if u.len() != n {
        return Err(Error::Argument(format!("{} residuals for {n} rows", u.len())));
    }
    let bread = xtx_inverse(x)?;
    let g = match time {
        None => DMatrix::from_fn(n, k, |i, j| x[(i, j)] * u[i]),
        Some((idx, periods)) => {
            let mut g = DMatrix::zeros(periods, k);
            for i in 0..n {
                for j in 0..k {
                    g[(idx[i], j)] += x[(i, j)] * u[i];
                }
            }
            g
        }
    };
    let meat = long_run_sum(&g, bandwidth);
    Ok(repair_psd(&bread * meat * &bread))
}

/// Time-series HAC covariance of OLS coefficients.
pub fn hac_covariance(x: &DMatrix<f64>, u: &DVector<f64>, bandwidth: usize) -> Result<DMatrix<f64>> {
    hac_covariance_by_time(x, u, None, bandwidth)
}

/// s² (X'X)⁻¹ with s² = u'u / (T − k).
pub fn classical_covariance(x: &DMatrix<f64>, u: &DVector<f64>) -> Result<DMatrix<f64>> {
    let (n, k) = x.shape();
    if n <= k {
        return Err(Error::Argument(format!("{n} rows for {k} regressors")));
    }
    Ok(xtx_inverse(x)? * (u.norm_squared() / (n - k) as f64))
}
