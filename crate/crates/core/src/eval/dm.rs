//! Diebold-Mariano equal predictive accuracy test.

use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc;

use crate::error::{Error, Result};
use crate::eval::hac::{long_run_variance, Bandwidth};

pub const DM_MIN_OBS: usize = 30;

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Auxiliary {
    pub bandwidth: Option<usize>,
    pub bootstrap_reps: Option<usize>,
    pub survivors: Option<Vec<String>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestResult {
    pub statistic: f64,
    pub p_value: f64,
    pub auxiliary: Auxiliary,
}

/// Two-sided p-value under the standard normal.
pub fn normal_two_sided(z: f64) -> f64 {
    if z.is_nan() {
        return f64::NAN;
    }
    erfc(z.abs() / std::f64::consts::SQRT_2).clamp(0.0, 1.0)
}

/// Truncation lag used for a loss differential at horizon `h`: the rule, but
/// never below h − 1.
pub fn dm_bandwidth(rule: Bandwidth, t: usize, h: usize) -> usize {
    rule.resolve(t).max(h.saturating_sub(1))
}

/// `Σd / (√T σ̂)` with σ̂² the long-run variance of d. Shared with the
/// fluctuation test so the full-window point matches exactly.
pub(crate) fn scaled_sum(d: &[f64], sigma2: f64) -> Result<f64> {
    let sum: f64 = d.iter().sum();
    if sigma2 > 0.0 {
        return Ok(sum / ((d.len() as f64).sqrt() * sigma2.sqrt()));
    }
    if sum == 0.0 {
        Ok(0.0)
    } else {
        Err(Error::DegenerateVariance(format!("constant loss differential with mean {:.6e}", sum / d.len() as f64)))
    }
}

pub(crate) fn differential(a: &[f64], b: &[f64]) -> Result<Vec<f64>> {
    if a.len() != b.len() {
        return Err(Error::Argument(format!("loss sequences of length {} and {}", a.len(), b.len())));
    }
    if a.iter().chain(b).any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("loss sequence".into()));
    }
    Ok(a.iter().zip(b).map(|(x, y)| x - y).collect())
}

/// Variance of a constant differential can come out as a rounding residue.
pub(crate) fn differential_variance(d: &[f64], bandwidth: usize) -> f64 {
    let first = d[0];
    if d.iter().all(|v| *v == first) {
        0.0
    } else {
        long_run_variance(d, bandwidth)
    }
}

/// DM statistic on d = a − b with the default Newey-West rule.
pub fn dm_test(loss_a: &[f64], loss_b: &[f64], h: usize) -> Result<TestResult> {
    dm_test_with(loss_a, loss_b, h, Bandwidth::NeweyWest)
}

pub fn dm_test_with(loss_a: &[f64], loss_b: &[f64], h: usize, rule: Bandwidth) -> Result<TestResult> {
    let d = differential(loss_a, loss_b)?;
    if d.len() < DM_MIN_OBS {
        return Err(Error::Argument(format!("DM test needs at least {DM_MIN_OBS} observations, got {}", d.len())));
    }
    let bw = dm_bandwidth(rule, d.len(), h);
    let stat = scaled_sum(&d, differential_variance(&d, bw))?;
    Ok(TestResult {
        statistic: stat,
        p_value: if stat == 0.0 { 1.0 } else { normal_two_sided(stat) },
        auxiliary: Auxiliary { bandwidth: Some(bw), ..Auxiliary::default() },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, Normal};

    #[test]
    fn identical_losses() {
        let a: Vec<f64> = (0..40).map(|i| (i as f64).sin().abs()).collect();
        let r = dm_test(&a, &a, 1).unwrap();
        assert_eq!((r.statistic, r.p_value), (0.0, 1.0));
    }

    #[test]
    fn constant_nonzero_differential_is_degenerate() {
        let a = vec![2.0; 40];
        let b = vec![1.0; 40];
        assert!(matches!(dm_test(&a, &b, 1), Err(Error::DegenerateVariance(_))));
    }

    #[test]
    fn short_sample_rejected() {
        assert!(matches!(dm_test(&[1.0; 29], &[0.0; 29], 1), Err(Error::Argument(_))));
    }

    #[test]
    fn shifted_mean_statistic() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let n = Normal::new(0.5, 1.0).unwrap();
        let d: Vec<f64> = (0..1000).map(|_| n.sample(&mut rng)).collect();
        let r = dm_test(&d, &vec![0.0; 1000], 1).unwrap();
        assert!((r.statistic - 0.5 * 1000f64.sqrt()).abs() < 1.5, "{}", r.statistic);
    }

    #[test]
    fn bandwidth_floor_follows_horizon() {
        assert_eq!(dm_bandwidth(Bandwidth::NeweyWest, 100, 12), 11);
        assert_eq!(dm_bandwidth(Bandwidth::NeweyWest, 100, 1), 4);
    }

    #[test]
    fn p_value_reference_points() {
        assert!((normal_two_sided(1.959963984540054) - 0.05).abs() < 1e-9);
        assert_eq!(normal_two_sided(0.0), 1.0);
    }

    proptest! {
        #[test]
        fn swapping_negates_statistic(
            a in proptest::collection::vec(0.0f64..10.0, 30..80),
            seed in 0u64..1000,
            h in 1usize..13,
        ) {
            let b: Vec<f64> = a.iter().enumerate().map(|(i, v)| (v * 1.3 + (i as u64 ^ seed) as f64 * 0.01) % 7.0).collect();
            let ab = dm_test(&a, &b, h).unwrap();
            let ba = dm_test(&b, &a, h).unwrap();
            prop_assert_eq!(ab.statistic, -ba.statistic);
            prop_assert_eq!(ab.p_value, ba.p_value);
            prop_assert!((0.0..=1.0).contains(&ab.p_value));
        }
    }
}
