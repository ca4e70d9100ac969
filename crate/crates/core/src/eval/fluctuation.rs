//! Rolling-window DM statistics with time-uniform critical bands.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::eval::dm::{differential, differential_variance, dm_bandwidth, scaled_sum};
use crate::eval::hac::Bandwidth;

pub const MIN_WINDOW: usize = 24;

/// Two-sided critical values by window share μ = m/T at 5% and 10%.
const TABLE: [(f64, f64, f64); 10] = [
    (0.1, 3.393, 3.170),
    (0.2, 3.179, 2.948),
    (0.3, 3.012, 2.766),
    (0.4, 2.890, 2.626),
    (0.5, 2.779, 2.500),
    (0.6, 2.634, 2.356),
    (0.7, 2.560, 2.252),
    (0.8, 2.433, 2.130),
    (0.9, 2.248, 1.950),
    (1.0, 1.960, 1.645),
];

/// Linear interpolation in μ; shares below 0.1 use the 0.1 row.
pub fn fluctuation_critical_value(mu: f64, level: f64) -> Result<f64> {
    let col = |r: &(f64, f64, f64)| if level == 0.05 { r.1 } else { r.2 };
    if level != 0.05 && level != 0.10 {
        return Err(Error::Argument(format!("fluctuation bands exist at 5% and 10%, not {level}")));
    }
    if !(mu > 0.0 && mu <= 1.0) {
        return Err(Error::Argument(format!("window share {mu} outside (0, 1]")));
    }
    if mu <= TABLE[0].0 {
        return Ok(col(&TABLE[0]));
    }
    let i = TABLE.iter().position(|r| r.0 >= mu - 1e-12).expect("mu ≤ 1");
    if (TABLE[i].0 - mu).abs() <= 1e-12 {
        return Ok(col(&TABLE[i]));
    }
    let (lo, hi) = (&TABLE[i - 1], &TABLE[i]);
    let w = (mu - lo.0) / (hi.0 - lo.0);
    Ok(col(lo) + w * (col(hi) - col(lo)))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FluctuationPath {
    pub window: usize,
    pub mu: f64,
    pub bandwidth: usize,
    /// Entry j covers observations j..j+window.
    pub statistics: Vec<f64>,
    pub critical_5: f64,
    pub critical_10: f64,
}

impl FluctuationPath {
    /// Index of the first window whose statistic leaves the 5% band.
    pub fn first_crossing(&self) -> Option<usize> {
        self.statistics.iter().position(|s| s.abs() > self.critical_5)
    }
}

/// Window sums of d scaled by the full-sample long-run standard deviation.
pub fn fluctuation_test(loss_a: &[f64], loss_b: &[f64], window: usize, h: usize) -> Result<FluctuationPath> {
    let d = differential(loss_a, loss_b)?;
    let t = d.len();
    if window < MIN_WINDOW {
        return Err(Error::Argument(format!("fluctuation window {window} below {MIN_WINDOW}")));
    }
    if window != t && 2 * window > t {
        return Err(Error::Argument(format!("fluctuation window {window} exceeds half the sample ({t})")));
    }
    let bw = dm_bandwidth(Bandwidth::NeweyWest, t, h);
    let sigma2 = differential_variance(&d, bw);
    let statistics = (0..=t - window).map(|j| scaled_sum(&d[j..j + window], sigma2)).collect::<Result<Vec<_>>>()?;
    let mu = window as f64 / t as f64;
    Ok(FluctuationPath {
        window,
        mu,
        bandwidth: bw,
        statistics,
        critical_5: fluctuation_critical_value(mu, 0.05)?,
        critical_10: fluctuation_critical_value(mu, 0.10)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::eval::dm::dm_test;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    fn noise(t: usize, seed: u64) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..t).map(|_| StandardNormal.sample(&mut rng)).collect()
    }

    #[test]
    fn identical_losses_give_flat_zero_path() {
        let a = noise(100, 1);
        let p = fluctuation_test(&a, &a, 30, 1).unwrap();
        assert_eq!(p.statistics.len(), 71);
        assert!(p.statistics.iter().all(|s| *s == 0.0));
    }

    #[test]
    fn full_window_matches_dm() {
        let a = noise(120, 2);
        let b = noise(120, 3);
        let p = fluctuation_test(&a, &b, 120, 3).unwrap();
        assert_eq!(p.statistics.len(), 1);
        assert_eq!(p.statistics[0], dm_test(&a, &b, 3).unwrap().statistic);
        assert_eq!(p.critical_5, 1.96);
    }

    #[test]
    fn window_guards() {
        let a = noise(100, 4);
        assert!(matches!(fluctuation_test(&a, &a, 23, 1), Err(Error::Argument(_))));
        assert!(matches!(fluctuation_test(&a, &a, 51, 1), Err(Error::Argument(_))));
        assert!(fluctuation_test(&a, &a, 50, 1).is_ok());
    }

    #[test]
    fn level_shift_crosses_after_break() {
        let t = 400;
        let e = noise(t, 5);
        let a: Vec<f64> = (0..t).map(|i| e[i] + if i >= t / 2 { 1.0 } else { 0.0 }).collect();
        let p = fluctuation_test(&a, &vec![0.0; t], 60, 1).unwrap();
        let cross = p.first_crossing().expect("band crossed");
        assert!(cross + p.window > t / 2, "crossing window ends at {}", cross + p.window);
        assert!(p.statistics[..t / 2 - p.window].iter().all(|s| s.abs() <= p.critical_5));
    }

    #[test]
    fn critical_values_interpolate() {
        assert_eq!(fluctuation_critical_value(0.3, 0.05).unwrap(), 3.012);
        let mid = fluctuation_critical_value(0.25, 0.10).unwrap();
        assert!((mid - (2.948 + 2.766) / 2.0).abs() < 1e-12);
        assert!(fluctuation_critical_value(0.3, 0.01).is_err());
    }
}
