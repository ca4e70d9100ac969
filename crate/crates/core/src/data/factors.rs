//! Principal-component factor extraction.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Static factors `F` and loadings `Λ` with `X ≈ F Λ'`.
///
/// Factors are principal-component scores (`F = X Λ`), so their Gram matrix
/// is diagonal with entries `T · eigenvalue`. Each loading vector is signed so
/// that its largest-magnitude entry is positive.
#[derive(Debug, Clone, PartialEq)]
pub struct FactorSet {
    pub factors: DMatrix<f64>,
    pub loadings: DMatrix<f64>,
    /// All `min(T, N)` eigenvalues of `X'X / T`, non-increasing.
    pub eigenvalues: Vec<f64>,
    pub k: usize,
}

impl FactorSet {
    /// Scores for a new standardized observation.
    pub fn project_row(&self, x: &[f64]) -> Vec<f64> {
        let n = self.loadings.nrows();
        (0..self.k)
            .map(|c| (0..n).map(|i| x[i] * self.loadings[(i, c)]).sum())
            .collect()
    }

    pub fn project(&self, x: &DMatrix<f64>) -> DMatrix<f64> {
        x * &self.loadings
    }

    pub fn reconstruct(&self) -> DMatrix<f64> {
        &self.factors * self.loadings.transpose()
    }

    /// Share of total variance carried by each retained component.
    pub fn variance_shares(&self) -> Vec<f64> {
        let total: f64 = self.eigenvalues.iter().sum();
        self.eigenvalues[..self.k].iter().map(|e| e / total).collect()
    }
}

/// Extract the first `k` principal components of the (already standardized)
/// `T × N` matrix `x`.
pub fn extract_factors(x: &DMatrix<f64>, k: usize) -> Result<FactorSet> {
    let (t, n) = x.shape();
    let r = t.min(n);
    if k > r {
        return Err(Error::Argument(format!("K={k} exceeds min(T,N)={r}")));
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("factor input contains missing values".into()));
    }
    let svd = x.clone().svd(true, true);
    let u = svd.u.expect("svd computed with u");
    let v_t = svd.v_t.expect("svd computed with v");
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&a, &b| svd.singular_values[b].total_cmp(&svd.singular_values[a]));

    let mut factors = DMatrix::zeros(t, k);
    let mut loadings = DMatrix::zeros(n, k);
    for (c, &src) in order.iter().take(k).enumerate() {
        let s = svd.singular_values[src];
        let mut load: DVector<f64> = v_t.row(src).transpose();
        let mut score: DVector<f64> = u.column(src) * s;
        let pivot = load.iter().copied().fold(0.0f64, |best, v| if v.abs() > best.abs() { v } else { best });
        if pivot < 0.0 {
            load.neg_mut();
            score.neg_mut();
        }
        loadings.set_column(c, &load);
        factors.set_column(c, &score);
    }
    let eigenvalues = order
        .iter()
        .map(|&i| svd.singular_values[i] * svd.singular_values[i] / t as f64)
        .collect();
    Ok(FactorSet { factors, loadings, eigenvalues, k })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::Standardization;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random(t: usize, n: usize, seed: u64) -> DMatrix<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x = DMatrix::from_fn(t, n, |_, _| rng.gen_range(-1.0..1.0));
        Standardization::fit(&x).apply(&x)
    }

    #[test]
    fn identical_columns_put_all_variance_in_first_component() {
        let mut x = random(40, 2, 1);
        let c0 = x.column(0).clone_owned();
        x.set_column(1, &c0);
        let fs = extract_factors(&x, 1).unwrap();
        assert!((fs.variance_shares()[0] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn orthonormal_columns_have_equal_eigenvalues() {
        let q = random(30, 4, 2).qr().q();
        let fs = extract_factors(&q, 4).unwrap();
        for e in &fs.eigenvalues {
            assert!((e - fs.eigenvalues[0]).abs() < 1e-12);
        }
    }

    #[test]
    fn full_rank_reconstruction() {
        // Oracle: with all components retained, F Λ' must reproduce X.
        let x = random(50, 10, 3);
        let fs = extract_factors(&x, 10).unwrap();
        assert!((fs.reconstruct() - &x).abs().max() < 1e-8);
    }

    #[test]
    fn factors_orthogonal_eigenvalues_sorted_signs_fixed() {
        let x = random(80, 12, 4);
        let fs = extract_factors(&x, 6).unwrap();
        let g = fs.factors.transpose() * &fs.factors;
        for i in 0..6 {
            for j in 0..6 {
                if i != j {
                    assert!(g[(i, j)].abs() < 1e-8 * 80.0);
                }
            }
            let col = fs.loadings.column(i);
            let big = col.iter().copied().fold(0.0f64, |b, v| if v.abs() > b.abs() { v } else { b });
            assert!(big > 0.0);
        }
        assert!(fs.eigenvalues.windows(2).all(|w| w[0] >= w[1]));
        assert!((fs.project(&x) - &fs.factors).abs().max() < 1e-9);
    }

    #[test]
    fn too_many_factors_rejected() {
        assert!(extract_factors(&random(5, 3, 5), 4).is_err());
    }
}
