//! Synthetic FRED-MD-shaped panels for tests, benches and dry runs.

use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::data::panel::RawPanel;
use crate::date::Month;

/// `n_series` monthly series driven by three persistent factors. Column 0
/// (`INDPRO`, log-differenced) loads nonlinearly on the lagged factors and
/// column 1 (`UNRATE`, differenced) linearly; the rest cycle through codes
/// 5, 2, 1 and 6.
pub fn synthetic_panel(n_series: usize, n_periods: usize, start: Month, seed: u64) -> RawPanel {
    assert!(n_series >= 2, "need at least the two target series");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n01 = Normal::new(0.0, 1.0).expect("valid normal");
    let k = 3;
    let phi = [0.8, 0.6, 0.4];
    let mut f: DMatrix<f64> = DMatrix::zeros(n_periods, k);
    for t in 1..n_periods {
        for j in 0..k {
            f[(t, j)] = phi[j] * f[(t - 1, j)] + n01.sample(&mut rng);
        }
    }
    let loadings = DMatrix::from_fn(n_series, k, |_, _| n01.sample(&mut rng));
    let mut names = vec!["INDPRO".to_string(), "UNRATE".to_string()];
    names.extend((2..n_series).map(|i| format!("S{i:03}")));
    let mut tcodes = vec![5u8, 2];
    tcodes.extend((2..n_series).map(|i| [5u8, 2, 1, 6][i % 4]));
    let mut values = DMatrix::zeros(n_periods, n_series);
    for j in 0..n_series {
        let mut level = 100.0f64;
        let mut growth = 0.0f64;
        for t in 0..n_periods {
            let lag = t.saturating_sub(1);
            let common: f64 = match j {
                0 => 0.6 * f[(lag, 0)] + 0.8 * (1.5 * f[(lag, 1)]).tanh() - 0.3 * f[(lag, 2)].abs(),
                1 => -0.5 * f[(lag, 0)] + 0.2 * f[(lag, 2)],
                _ => (0..k).map(|c| loadings[(j, c)] * f[(t, c)]).sum(),
            };
            let e: f64 = n01.sample(&mut rng);
            let x = common + 0.7 * e;
            values[(t, j)] = match tcodes[j] {
                1 => x,
                2 => {
                    level += 0.1 * x;
                    level
                }
                5 => {
                    level *= (0.005 * x).exp();
                    level
                }
                _ => {
                    growth = 0.9 * growth + 0.001 * x;
                    level *= growth.exp();
                    level
                }
            };
        }
    }
    RawPanel { dates: (0..n_periods).map(|i| start.add(i as i32)).collect(), names, tcodes, values }
}
