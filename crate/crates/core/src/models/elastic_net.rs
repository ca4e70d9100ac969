//! Elastic net by cyclic coordinate descent.
//!
//! Objective: `Σ(y − Zβ)² + λ Σ_k (α|β_k| + (1 − α) β_k²)`.
//! Library parameterizations such as `(1/2n)‖y − Zβ‖² + λ'(α‖β‖₁ + (1−α)/2 ‖β‖²)`
//! map onto it with `λ = 2nλ'` for the lasso part and `λ = nλ'` for the ridge part.
//! At `α = 0` the objective is ridge with the same `λ`.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::models::linear::{center, check_inputs, restore, Centered, LinearModel};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ElasticNet {
    pub lambda: f64,
    pub alpha: f64,
    pub intercept: bool,
    pub max_sweeps: usize,
    /// Stationarity tolerance relative to `max(1, ‖Z'y‖∞)`.
    pub tol: f64,
}

impl ElasticNet {
    pub fn new(lambda: f64, alpha: f64) -> Self {
        ElasticNet { lambda, alpha, intercept: true, max_sweeps: 100_000, tol: 1e-10 }
    }

    fn check(&self) -> Result<()> {
        if !(self.lambda >= 0.0) {
            return Err(Error::Argument(format!("penalty {} must be non-negative", self.lambda)));
        }
        if !(0.0..=1.0).contains(&self.alpha) {
            return Err(Error::Argument(format!("mixing weight {} outside [0,1]", self.alpha)));
        }
        Ok(())
    }

    pub fn fit(&self, z: &DMatrix<f64>, y: &DVector<f64>) -> Result<LinearModel> {
        self.check()?;
        check_inputs(z, y)?;
        let prob = CdProblem::new(center(z, y, self.intercept));
        let mut beta = DVector::zeros(z.ncols());
        prob.solve(self.lambda, self.alpha, &mut beta, self.max_sweeps, self.tol)?;
        Ok(restore(&prob.c, beta, self.intercept))
    }

    /// Fit a penalty ladder with warm starts. The ladder is visited from the
    /// largest penalty down; results are returned in input order.
    pub fn fit_path(&self, z: &DMatrix<f64>, y: &DVector<f64>, lambdas: &[f64]) -> Result<Vec<LinearModel>> {
        check_inputs(z, y)?;
        let prob = CdProblem::new(center(z, y, self.intercept));
        let mut order: Vec<usize> = (0..lambdas.len()).collect();
        order.sort_by(|&a, &b| lambdas[b].total_cmp(&lambdas[a]));
        let mut beta = DVector::zeros(z.ncols());
        let mut out: Vec<Option<LinearModel>> = vec![None; lambdas.len()];
        for i in order {
            let en = ElasticNet { lambda: lambdas[i], ..*self };
            en.check()?;
            prob.solve(en.lambda, en.alpha, &mut beta, self.max_sweeps, self.tol)?;
            out[i] = Some(restore(&prob.c, beta.clone(), self.intercept));
        }
        Ok(out.into_iter().map(|m| m.expect("every ladder point fitted")).collect())
    }
}

/// Elastic net through the origin.
pub fn fit_elastic_net(z: &DMatrix<f64>, y: &DVector<f64>, lambda: f64, alpha: f64) -> Result<LinearModel> {
    ElasticNet { intercept: false, ..ElasticNet::new(lambda, alpha) }.fit(z, y)
}

fn soft_threshold(x: f64, t: f64) -> f64 {
    if x > t {
        x - t
    } else if x < -t {
        x + t
    } else {
        0.0
    }
}

/// Largest violation of the stationarity conditions
/// `2z_k'r − 2λ(1−α)β_k ∈ λα ∂|β_k|`.
pub fn stationarity_violation(z: &DMatrix<f64>, y: &DVector<f64>, beta: &[f64], lambda: f64, alpha: f64) -> f64 {
    let r = y - z * DVector::from_column_slice(beta);
    let g = z.transpose() * r * 2.0;
    let l1 = lambda * alpha;
    (0..beta.len())
        .map(|k| {
            let gk = g[k] - 2.0 * lambda * (1.0 - alpha) * beta[k];
            if beta[k] == 0.0 {
                (gk.abs() - l1).max(0.0)
            } else {
                (gk - l1 * beta[k].signum()).abs()
            }
        })
        .fold(0.0, f64::max)
}

struct CdProblem {
    c: Centered,
    zz: Vec<f64>,
    scale: f64,
}

impl CdProblem {
    fn new(c: Centered) -> Self {
        let zz = c.z.column_iter().map(|col| col.norm_squared()).collect();
        let zty = c.z.transpose() * &c.y;
        let scale = zty.amax().max(1.0);
        CdProblem { c, zz, scale }
    }

    /// One pass over `coords`; returns the largest weighted coefficient change.
    fn sweep(&self, coords: &[usize], lambda: f64, alpha: f64, beta: &mut DVector<f64>, r: &mut DVector<f64>) -> f64 {
        let half_l1 = lambda * alpha / 2.0;
        let l2 = lambda * (1.0 - alpha);
        let mut max_change = 0.0f64;
        for &k in coords {
            let denom = self.zz[k] + l2;
            let old = beta[k];
            let new = if denom <= 0.0 {
                0.0
            } else {
                let rho = self.c.z.column(k).dot(r) + self.zz[k] * old;
                soft_threshold(rho, half_l1) / denom
            };
            if new != old {
                r.axpy(old - new, &self.c.z.column(k), 1.0);
                beta[k] = new;
                max_change = max_change.max((new - old).abs() * denom);
            }
        }
        max_change
    }

    fn solve(&self, lambda: f64, alpha: f64, beta: &mut DVector<f64>, max_sweeps: usize, tol: f64) -> Result<()> {
        let p = beta.len();
        if p == 0 {
            return Ok(());
        }
        let all: Vec<usize> = (0..p).collect();
        let mut r = &self.c.y - &self.c.z * &*beta;
        let target = tol * self.scale;
        let mut sweeps = 0;
        let mut last_change = f64::INFINITY;
        while sweeps < max_sweeps {
            last_change = self.sweep(&all, lambda, alpha, beta, &mut r);
            sweeps += 1;
            if last_change <= target {
                let gap = stationarity_violation(&self.c.z, &self.c.y, beta.as_slice(), lambda, alpha);
                if gap <= 10.0 * target {
                    return Ok(());
                }
            }
            let active: Vec<usize> = (0..p).filter(|&k| beta[k] != 0.0).collect();
            while sweeps < max_sweeps {
                let change = self.sweep(&active, lambda, alpha, beta, &mut r);
                sweeps += 1;
                if change <= target {
                    break;
                }
            }
        }
        Err(Error::NoConvergence {
            sweeps,
            max_change: last_change,
            gap: stationarity_violation(&self.c.z, &self.c.y, beta.as_slice(), lambda, alpha),
            last_iterate: beta.iter().copied().collect(),
        })
    }
}
