//! Random forest of CART regression trees.

use nalgebra::{DMatrix, DVector};
use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::models::linear::check_inputs;

const LEAF: u32 = u32::MAX;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
struct Node {
    /// Split feature, or `LEAF`.
    feature: u32,
    /// Split threshold, or the leaf value.
    value: f64,
    left: u32,
    right: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tree {
    nodes: Vec<Node>,
}

impl Tree {
    pub fn predict_row(&self, x: &[f64]) -> f64 {
        let mut i = 0usize;
        loop {
            let n = &self.nodes[i];
            if n.feature == LEAF {
                return n.value;
            }
            i = if x[n.feature as usize] <= n.value { n.left } else { n.right } as usize;
        }
    }

    pub fn n_leaves(&self) -> usize {
        self.nodes.iter().filter(|n| n.feature == LEAF).count()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForestModel {
    pub trees: Vec<Tree>,
    /// Out-of-bag mean squared error; NaN when no row is ever out of bag.
    pub oob_mse: f64,
    pub seed: u64,
}

impl ForestModel {
    pub fn predict_row(&self, x: &[f64]) -> f64 {
        self.trees.iter().map(|t| t.predict_row(x)).sum::<f64>() / self.trees.len() as f64
    }

    pub fn predict(&self, z: &DMatrix<f64>) -> DVector<f64> {
        DVector::from_iterator(
            z.nrows(),
            (0..z.nrows()).map(|i| {
                let row: Vec<f64> = z.row(i).iter().copied().collect();
                self.predict_row(&row)
            }),
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RandomForest {
    pub n_trees: usize,
    pub mtry_frac: f64,
    pub min_leaf: usize,
    pub max_depth: Option<usize>,
    pub bootstrap: bool,
    pub seed: u64,
}

impl Default for RandomForest {
    fn default() -> Self {
        RandomForest { n_trees: 500, mtry_frac: 1.0 / 3.0, min_leaf: 5, max_depth: None, bootstrap: true, seed: 0 }
    }
}

impl RandomForest {
    pub fn fit(&self, z: &DMatrix<f64>, y: &DVector<f64>) -> Result<ForestModel> {
        check_inputs(z, y)?;
        if self.n_trees == 0 {
            return Err(Error::Argument("forest needs at least one tree".into()));
        }
        if !(self.mtry_frac > 0.0 && self.mtry_frac <= 1.0) {
            return Err(Error::Argument(format!("mtry fraction {} outside (0,1]", self.mtry_frac)));
        }
        let min_leaf = self.min_leaf.max(1);
        let n = z.nrows();
        if n < 2 * min_leaf {
            return Err(Error::Argument(format!("{n} rows cannot hold two leaves of {min_leaf}")));
        }
        let p = z.ncols();
        let mtry = ((self.mtry_frac * p as f64).ceil() as usize).clamp(1, p.max(1));
        // Column-major copy for cache-friendly split scans.
        let cols: Vec<Vec<f64>> = z.column_iter().map(|c| c.iter().copied().collect()).collect();
        let ys: Vec<f64> = y.iter().copied().collect();

        let grown: Vec<(Tree, Vec<bool>)> = (0..self.n_trees)
            .into_par_iter()
            .map(|t| {
                let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
                rng.set_stream(t as u64);
                let (idx, in_bag) = if self.bootstrap {
                    let mut in_bag = vec![false; n];
                    let idx: Vec<usize> = (0..n)
                        .map(|_| {
                            let i = rng.gen_range(0..n);
                            in_bag[i] = true;
                            i
                        })
                        .collect();
                    (idx, in_bag)
                } else {
                    ((0..n).collect(), vec![true; n])
                };
                let mut b = Builder { cols: &cols, y: &ys, mtry, min_leaf, max_depth: self.max_depth, rng, nodes: Vec::new(), buf: Vec::new() };
                let mut idx = idx;
                b.grow(&mut idx, 0);
                (Tree { nodes: b.nodes }, in_bag)
            })
            .collect();

        let mut sse = 0.0;
        let mut count = 0usize;
        let mut row = vec![0.0; p];
        for i in 0..n {
            for j in 0..p {
                row[j] = cols[j][i];
            }
            let (mut s, mut m) = (0.0, 0usize);
            for (tree, in_bag) in &grown {
                if !in_bag[i] {
                    s += tree.predict_row(&row);
                    m += 1;
                }
            }
            if m > 0 {
                let e = ys[i] - s / m as f64;
                sse += e * e;
                count += 1;
            }
        }
        let oob_mse = if count > 0 { sse / count as f64 } else { f64::NAN };
        Ok(ForestModel { trees: grown.into_iter().map(|(t, _)| t).collect(), oob_mse, seed: self.seed })
    }
}

pub fn fit_random_forest(
    z: &DMatrix<f64>,
    y: &DVector<f64>,
    n_trees: usize,
    mtry_frac: f64,
    min_leaf: usize,
    seed: u64,
) -> Result<ForestModel> {
    RandomForest { n_trees, mtry_frac, min_leaf, seed, ..RandomForest::default() }.fit(z, y)
}

struct Builder<'a> {
    cols: &'a [Vec<f64>],
    y: &'a [f64],
    mtry: usize,
    min_leaf: usize,
    max_depth: Option<usize>,
    rng: ChaCha8Rng,
    nodes: Vec<Node>,
    buf: Vec<(f64, f64)>,
}

impl Builder<'_> {
    fn leaf(&mut self, idx: &[usize]) -> u32 {
        let v = idx.iter().map(|&i| self.y[i]).sum::<f64>() / idx.len() as f64;
        self.nodes.push(Node { feature: LEAF, value: v, left: 0, right: 0 });
        (self.nodes.len() - 1) as u32
    }

    fn grow(&mut self, idx: &mut [usize], depth: usize) -> u32 {
        let n = idx.len();
        if n < 2 * self.min_leaf || self.max_depth.is_some_and(|d| depth >= d) {
            return self.leaf(idx);
        }
        let total: f64 = idx.iter().map(|&i| self.y[i]).sum();
        let base = total * total / n as f64;
        let mut best: Option<(usize, f64, f64)> = None;
        let features = sample(&mut self.rng, self.cols.len(), self.mtry);
        for f in features.iter() {
            let col = &self.cols[f];
            self.buf.clear();
            self.buf.extend(idx.iter().map(|&i| (col[i], self.y[i])));
            self.buf.sort_by(|a, b| a.0.total_cmp(&b.0));
            let mut left = 0.0;
            for k in 1..n {
                left += self.buf[k - 1].1;
                if k < self.min_leaf || n - k < self.min_leaf || self.buf[k - 1].0 >= self.buf[k].0 {
                    continue;
                }
                let right = total - left;
                let score = left * left / k as f64 + right * right / (n - k) as f64;
                if best.map_or(true, |(_, _, s)| score > s) {
                    let thr = 0.5 * (self.buf[k - 1].0 + self.buf[k].0);
                    let thr = if thr < self.buf[k].0 { thr } else { self.buf[k - 1].0 };
                    best = Some((f, thr, score));
                }
            }
        }
        match best {
            Some((f, thr, score)) if score > base * (1.0 + 1e-12) + 1e-300 => {
                let col = &self.cols[f];
                let mut split = 0;
                for k in 0..n {
                    if col[idx[k]] <= thr {
                        idx.swap(k, split);
                        split += 1;
                    }
                }
                let me = self.nodes.len();
                self.nodes.push(Node { feature: f as u32, value: thr, left: 0, right: 0 });
                let (l, r) = idx.split_at_mut(split);
                let li = self.grow(l, depth + 1);
                let ri = self.grow(r, depth + 1);
                self.nodes[me].left = li;
                self.nodes[me].right = ri;
                me as u32
            }
            _ => self.leaf(idx),
        }
    }
}
