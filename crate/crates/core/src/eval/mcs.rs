//! Model confidence set with the T_max statistic and a moving-block bootstrap.

use std::collections::BTreeMap;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::eval::dm::{Auxiliary, TestResult};

/// T × M, column j the losses of model j on common dates.
pub type LossMatrix = DMatrix<f64>;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct McsOptions {
    pub alpha: f64,
    pub reps: usize,
    pub block_length: usize,
    pub seed: u64,
}

impl Default for McsOptions {
    fn default() -> Self {
        McsOptions { alpha: 0.25, reps: 999, block_length: 12, seed: 0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McsResult {
    /// Monotonized p-value of every model; the last survivor gets 1.
    pub p_values: BTreeMap<String, f64>,
    /// Models in the order they leave the set, the last one never leaves.
    pub elimination_order: Vec<String>,
    /// First elimination step; survivors at `alpha` in the auxiliary field.
    pub test: TestResult,
}

impl McsResult {
    pub fn survivors_at(&self, alpha: f64) -> Vec<String> {
        self.p_values.iter().filter(|(_, p)| **p >= alpha).map(|(m, _)| m.clone()).collect()
    }

    pub fn contains(&self, model: &str, alpha: f64) -> bool {
        self.p_values.get(model).is_some_and(|p| *p >= alpha)
    }
}

/// Circular moving-block resample of 0..t.
fn block_indices(t: usize, block: usize, rng: &mut ChaCha8Rng) -> Vec<usize> {
    let mut idx = Vec::with_capacity(t + block);
    while idx.len() < t {
        let s = rng.gen_range(0..t);
        idx.extend((0..block).map(|k| (s + k) % t));
    }
    idx.truncate(t);
    idx
}

/// `losses` is T × M with column j the loss sequence of `names[j]` on common dates.
pub fn model_confidence_set(names: &[String], losses: &DMatrix<f64>, opts: &McsOptions) -> Result<McsResult> {
    let (t, m) = losses.shape();
    if m == 0 || names.len() != m {
        return Err(Error::Argument(format!("{} names for {m} loss columns", names.len())));
    }
    if m > 1 && t < 2 {
        return Err(Error::Argument(format!("MCS needs at least 2 dates, got {t}")));
    }
    if losses.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("MCS loss panel".into()));
    }
    if opts.reps == 0 || opts.block_length == 0 {
        return Err(Error::Argument("MCS needs positive reps and block length".into()));
    }
    let block = opts.block_length.min(t.max(1));
    let mean_loss: Vec<f64> = losses.column_iter().map(|c| c.sum() / t as f64).collect();
    // bootstrap means per replication and model
    let boot: Vec<Vec<f64>> = (0..opts.reps)
        .into_par_iter()
        .map(|b| {
            let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
            rng.set_stream(b as u64);
            let idx = block_indices(t, block, &mut rng);
            (0..m).map(|j| idx.iter().map(|&i| losses[(i, j)]).sum::<f64>() / t as f64).collect()
        })
        .collect();

    // differentials below this are rounding residue
    let tol = 1e-12 * (1.0 + mean_loss.iter().fold(0.0f64, |a, v| a.max(v.abs())));
    let mut alive: Vec<usize> = (0..m).collect();
    let mut order = Vec::new();
    let mut p_values = BTreeMap::new();
    let mut running = 0.0f64;
    let mut first: Option<(f64, f64)> = None;
    while alive.len() > 1 {
        let k = alive.len() as f64;
        let avg = alive.iter().map(|&j| mean_loss[j]).sum::<f64>() / k;
        let dbar: Vec<f64> = alive.iter().map(|&j| mean_loss[j] - avg).collect();
        let dev: Vec<Vec<f64>> = boot
            .iter()
            .map(|bm| {
                let bavg = alive.iter().map(|&j| bm[j]).sum::<f64>() / k;
                alive.iter().zip(&dbar).map(|(&j, d)| bm[j] - bavg - d).collect()
            })
            .collect();
        let var: Vec<f64> = (0..alive.len())
            .map(|i| dev.iter().map(|r| r[i] * r[i]).sum::<f64>() / opts.reps as f64)
            .collect();
        let tstat: Vec<f64> = dbar
            .iter()
            .zip(&var)
            .map(|(d, v)| match (v.sqrt() > tol, *d) {
                (true, d) => d / v.sqrt(),
                (false, d) if d > tol => f64::INFINITY,
                (false, d) if d < -tol => f64::NEG_INFINITY,
                _ => 0.0,
            })
            .collect();
        let (worst, t_max) = tstat
            .iter()
            .enumerate()
            .fold((0, f64::NEG_INFINITY), |(bi, bv), (i, v)| if *v > bv { (i, *v) } else { (bi, bv) });
        let exceed = dev
            .iter()
            .filter(|r| {
                let tb = r
                    .iter()
                    .zip(&var)
                    .map(|(x, v)| if v.sqrt() > tol { x / v.sqrt() } else { 0.0 })
                    .fold(f64::NEG_INFINITY, f64::max);
                tb >= t_max
            })
            .count();
        let p = exceed as f64 / opts.reps as f64;
        first.get_or_insert((t_max, p));
        running = running.max(p);
        let gone = alive.remove(worst);
        p_values.insert(names[gone].clone(), running);
        order.push(names[gone].clone());
    }
    p_values.insert(names[alive[0]].clone(), 1.0);
    order.push(names[alive[0]].clone());
    let (statistic, p_value) = first.unwrap_or((0.0, 1.0));
    let mut out = McsResult {
        p_values,
        elimination_order: order,
        test: TestResult {
            statistic,
            p_value,
            auxiliary: Auxiliary { bandwidth: Some(block), bootstrap_reps: Some(opts.reps), survivors: None },
        },
    };
    out.test.auxiliary.survivors = Some(out.survivors_at(opts.alpha));
    Ok(out)
}
