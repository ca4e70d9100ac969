//! ε-insensitive support vector regression solved in the dual by SMO.
//!
//! The dual is written over `2l` multipliers `a = (α, α*)` with labels
//! `s = (+1…, −1…)`:
//!
//! ```text
//! min ½ a'Qa + p'a   s.t.  s'a = 0,  0 ≤ a ≤ C
//! Q_ij = s_i s_j K(z_{i mod l}, z_{j mod l}),  p = (ε − y, ε + y)
//! ```
//!
//! Working pairs are chosen by maximal violation for the first index and
//! second-order gain for the second; the run stops when the maximal KKT
//! violation `m(a) − M(a)` falls below the tolerance.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::models::kernel::Kernel;
use crate::models::linear::check_inputs;

const TAU: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct SvrModel {
    pub kernel: Kernel,
    /// Support vectors (training rows with `α − α* ≠ 0`).
    pub support: DMatrix<f64>,
    /// `α_j − α*_j` for each support vector.
    pub coef: Vec<f64>,
    pub intercept: f64,
    /// Full multiplier vectors over the training rows.
    pub alpha: Vec<f64>,
    pub alpha_star: Vec<f64>,
    /// Dual objective `½(α−α*)'K(α−α*) + εΣ(α+α*) − y'(α−α*)` at the solution.
    pub objective: f64,
    pub iterations: usize,
    pub kkt_violation: f64,
}

impl SvrModel {
    pub fn n_support(&self) -> usize {
        self.coef.len()
    }

    pub fn predict(&self, z: &DMatrix<f64>) -> Result<DVector<f64>> {
        if self.coef.is_empty() {
            return Ok(DVector::from_element(z.nrows(), self.intercept));
        }
        let k = self.kernel.gram(z, &self.support)?;
        Ok((k * DVector::from_column_slice(&self.coef)).add_scalar(self.intercept))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Svr {
    pub kernel: Kernel,
    pub c: f64,
    pub epsilon: f64,
    pub tol: f64,
    pub max_iter: usize,
}

impl Svr {
    pub fn new(kernel: Kernel, c: f64, epsilon: f64) -> Self {
        Svr { kernel, c, epsilon, tol: 1e-6, max_iter: 20_000_000 }
    }

    pub fn fit(&self, z: &DMatrix<f64>, y: &DVector<f64>) -> Result<SvrModel> {
        if !(self.c > 0.0 && self.c.is_finite()) {
            return Err(Error::Argument(format!("box constraint {} must be positive", self.c)));
        }
        if !(self.epsilon >= 0.0) {
            return Err(Error::Argument(format!("tube half-width {} must be non-negative", self.epsilon)));
        }
        check_inputs(z, y)?;
        let l = z.nrows();
        if l == 0 {
            return Err(Error::Argument("empty training set".into()));
        }
        let k = self.kernel.gram(z, z)?;
        let (a, grad, iterations, violation) = self.smo(&k, y)?;
        let (c, l2) = (self.c, 2 * l);
        let sign = |i: usize| if i < l { 1.0 } else { -1.0 };

        // Intercept from free multipliers, else the midpoint of the feasible interval.
        let (mut ub, mut lb, mut sum_free, mut n_free) = (f64::INFINITY, f64::NEG_INFINITY, 0.0, 0usize);
        for i in 0..l2 {
            let yg = sign(i) * grad[i];
            let at_upper = a[i] >= c;
            let at_lower = a[i] <= 0.0;
            if at_upper {
                if sign(i) < 0.0 { ub = ub.min(yg) } else { lb = lb.max(yg) }
            } else if at_lower {
                if sign(i) > 0.0 { ub = ub.min(yg) } else { lb = lb.max(yg) }
            } else {
                sum_free += yg;
                n_free += 1;
            }
        }
        let rho = if n_free > 0 { sum_free / n_free as f64 } else { 0.5 * (ub + lb) };

        let alpha: Vec<f64> = a[..l].to_vec();
        let alpha_star: Vec<f64> = a[l..].to_vec();
        let objective = {
            let p = |i: usize| if i < l { self.epsilon - y[i] } else { self.epsilon + y[i - l] };
            (0..l2).map(|i| a[i] * (grad[i] + p(i))).sum::<f64>() / 2.0
        };
        let sv: Vec<usize> = (0..l).filter(|&i| alpha[i] - alpha_star[i] != 0.0).collect();
        let support = DMatrix::from_fn(sv.len(), z.ncols(), |r, j| z[(sv[r], j)]);
        let coef = sv.iter().map(|&i| alpha[i] - alpha_star[i]).collect();
        Ok(SvrModel {
            kernel: self.kernel,
            support,
            coef,
            intercept: -rho,
            alpha,
            alpha_star,
            objective,
            iterations,
            kkt_violation: violation,
        })
    }

    /// Returns the multipliers, the gradient `Qa + p`, the iteration count and
    /// the final maximal violation.
    fn smo(&self, k: &DMatrix<f64>, y: &DVector<f64>) -> Result<(Vec<f64>, Vec<f64>, usize, f64)> {
        let l = y.len();
        let n = 2 * l;
        let c = self.c;
        let s: Vec<f64> = (0..n).map(|i| if i < l { 1.0 } else { -1.0 }).collect();
        let kd: Vec<f64> = (0..l).map(|i| k[(i, i)]).collect();
        let mut a = vec![0.0; n];
        let mut g: Vec<f64> = (0..n)
            .map(|i| if i < l { self.epsilon - y[i] } else { self.epsilon + y[i - l] })
            .collect();
        let qv = |i: usize, j: usize| s[i] * s[j] * k[(i % l, j % l)];

        let mut iter = 0;
        loop {
            // First index: maximal violating multiplier.
            let mut gmax = f64::NEG_INFINITY;
            let mut i_sel = usize::MAX;
            for t in 0..n {
                if s[t] > 0.0 {
                    if a[t] < c && -g[t] >= gmax {
                        gmax = -g[t];
                        i_sel = t;
                    }
                } else if a[t] > 0.0 && g[t] >= gmax {
                    gmax = g[t];
                    i_sel = t;
                }
            }
            // Second index: best second-order decrease among violating partners.
            let mut gmax2 = f64::NEG_INFINITY;
            let mut j_sel = usize::MAX;
            let mut obj_min = f64::INFINITY;
            if i_sel != usize::MAX {
                let ii = i_sel;
                let qii = kd[ii % l];
                for t in 0..n {
                    let qit = qv(ii, t);
                    let qtt = kd[t % l];
                    if s[t] > 0.0 {
                        if a[t] > 0.0 {
                            let diff = gmax + g[t];
                            gmax2 = gmax2.max(g[t]);
                            if diff > 0.0 {
                                let quad = qii + qtt - 2.0 * s[ii] * qit;
                                let obj = -diff * diff / if quad > 0.0 { quad } else { TAU };
                                if obj <= obj_min {
                                    obj_min = obj;
                                    j_sel = t;
                                }
                            }
                        }
                    } else if a[t] < c {
                        let diff = gmax - g[t];
                        gmax2 = gmax2.max(-g[t]);
                        if diff > 0.0 {
                            let quad = qii + qtt + 2.0 * s[ii] * qit;
                            let obj = -diff * diff / if quad > 0.0 { quad } else { TAU };
                            if obj <= obj_min {
                                obj_min = obj;
                                j_sel = t;
                            }
                        }
                    }
                }
            }
            let violation = if i_sel == usize::MAX { 0.0 } else { (gmax + gmax2).max(0.0) };
            if violation < self.tol || j_sel == usize::MAX {
                return Ok((a, g, iter, violation));
            }
            if iter >= self.max_iter {
                return Err(Error::SvrNoConvergence { iterations: iter, violation });
            }
            iter += 1;

            let (i, j) = (i_sel, j_sel);
            let (qii, qjj, qij) = (kd[i % l], kd[j % l], qv(i, j));
            let (old_i, old_j) = (a[i], a[j]);
            if s[i] != s[j] {
                let quad = (qii + qjj + 2.0 * qij).max(TAU);
                let delta = (-g[i] - g[j]) / quad;
                let diff = a[i] - a[j];
                a[i] += delta;
                a[j] += delta;
                if diff > 0.0 {
                    if a[j] < 0.0 {
                        a[j] = 0.0;
                        a[i] = diff;
                    }
                } else if a[i] < 0.0 {
                    a[i] = 0.0;
                    a[j] = -diff;
                }
                if diff > 0.0 {
                    if a[i] > c {
                        a[i] = c;
                        a[j] = c - diff;
                    }
                } else if a[j] > c {
                    a[j] = c;
                    a[i] = c + diff;
                }
            } else {
                let quad = (qii + qjj - 2.0 * qij).max(TAU);
                let delta = (g[i] - g[j]) / quad;
                let sum = a[i] + a[j];
                a[i] -= delta;
                a[j] += delta;
                if sum > c {
                    if a[i] > c {
                        a[i] = c;
                        a[j] = sum - c;
                    }
                } else if a[j] < 0.0 {
                    a[j] = 0.0;
                    a[i] = sum;
                }
                if sum > c {
                    if a[j] > c {
                        a[j] = c;
                        a[i] = sum - c;
                    }
                } else if a[i] < 0.0 {
                    a[i] = 0.0;
                    a[j] = sum;
                }
            }
            let (di, dj) = (a[i] - old_i, a[j] - old_j);
            for t in 0..n {
                g[t] += qv(i, t) * di + qv(j, t) * dj;
            }
        }
    }
}

pub fn fit_svr(z: &DMatrix<f64>, y: &DVector<f64>, kernel: Kernel, c: f64, epsilon: f64) -> Result<SvrModel> {
    Svr::new(kernel, c, epsilon).fit(z, y)
}
