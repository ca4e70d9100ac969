//! Hyperparameter selection: information criteria, pseudo-out-of-sample CV,
//! K-fold CV, and the refresh calendar.

pub mod criteria;
pub mod schedule;

use nalgebra::{DMatrix, DVector};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::predictors::{DesignSpec, Preprocessor, Rotation};
use crate::date::Month;
use crate::error::{Error, Result};
use crate::linalg::{select_entries, select_rows};
use crate::models::pipeline::{fit_predict_many, HyperPoint, ModelSettings};
use crate::models::spec::{Environment, Estimator, ModelSpec, Tuner};
use crate::models::Ols;
use crate::seed::derive_seed;

pub use criteria::{score_ic, IcFit};
pub use schedule::{block_origin, refresh_schedule, retune_origins, RefreshAction, REFRESH_MONTHS};

/// Default share of training rows held out for POOS validation.
pub const POOS_VALIDATION_SHARE: f64 = 0.25;

/// Minimum training rows for POOS cross-validation.
pub const POOS_MIN_TRAIN: usize = 120;

/// What a tuner needs to know about one (variable, horizon) problem.
pub trait DesignSource: Sync {
    fn horizon(&self) -> usize;
    fn date(&self, row: usize) -> Month;
    /// Panel width, used to count columns of rotated designs.
    fn n_series(&self) -> usize;
    /// Predictor rows `t` whose target (dated `t + h`) is observed by `info_end`.
    fn training_rows(&self, info_end: usize) -> Vec<usize>;
    /// Raw design rows and targets at `rows`, with any panel summaries
    /// (standardization, factors) estimated on data up to `info_end`.
    /// Unavailable entries are NaN.
    fn design(&self, structure: &DesignSpec, info_end: usize, rows: &[usize]) -> Result<(DMatrix<f64>, DVector<f64>)>;
}

/// `10^x` for `points` values of `x` evenly spaced over `[lo, hi]`.
pub fn log_ladder(lo: f64, hi: f64, points: usize) -> Vec<f64> {
    match points {
        0 => Vec::new(),
        1 => vec![10f64.powf(0.5 * (lo + hi))],
        _ => (0..points)
            .map(|i| 10f64.powf(lo + (hi - lo) * i as f64 / (points - 1) as f64))
            .collect(),
    }
}

/// Search space. Structural grids are absolute; continuous ladders are
/// multipliers of data-dependent scales (see [`LadderScale`]).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Grid {
    pub p_y: Vec<usize>,
    pub p_f: Vec<usize>,
    pub k: Vec<usize>,
    /// Mixing weights searched when α is cross-validated.
    pub alpha: Vec<f64>,
    /// × n
    pub ridge_lambda: Vec<f64>,
    /// × λ_max(α)
    pub en_lambda: Vec<f64>,
    /// × n
    pub krr_lambda: Vec<f64>,
    /// × √d
    pub sigma: Vec<f64>,
    /// × 3·sd(y)
    pub svr_c: Vec<f64>,
    /// × sd(y)
    pub svr_epsilon: Vec<f64>,
}

impl Default for Grid {
    fn default() -> Self {
        Grid {
            p_y: vec![1, 3, 6, 12],
            p_f: vec![1, 3, 6, 12],
            k: vec![3, 6, 10],
            alpha: vec![0.1, 0.3, 0.5, 0.7, 0.9],
            ridge_lambda: log_ladder(-4.0, 2.0, 10),
            en_lambda: log_ladder(-3.0, 0.0, 10),
            krr_lambda: log_ladder(-5.0, 0.0, 10),
            sigma: log_ladder(-1.0, 1.0, 5),
            svr_c: log_ladder(-2.0, 2.0, 5),
            svr_epsilon: log_ladder(-3.0, 0.0, 4),
        }
    }
}

/// Data-dependent scales for the continuous ladders, measured on the
/// preprocessed tuning-window design.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LadderScale {
    pub n: usize,
    pub d: usize,
    pub y_sd: f64,
    /// `max_j |z_j' (y − ȳ)|` over centered columns.
    pub zty_max: f64,
}

impl LadderScale {
    pub fn measure(z: &DMatrix<f64>, y: &DVector<f64>) -> Self {
        let n = y.len();
        let ym = y.mean();
        let yc = y.add_scalar(-ym);
        let zty_max = z
            .column_iter()
            .map(|c| {
                let m = c.mean();
                c.iter().zip(yc.iter()).map(|(a, b)| (a - m) * b).sum::<f64>().abs()
            })
            .fold(0.0, f64::max);
        let y_sd = if n > 1 { (yc.norm_squared() / (n - 1) as f64).sqrt() } else { 0.0 };
        LadderScale { n, d: z.ncols(), y_sd, zty_max }
    }
}

impl Grid {
    /// A grid with a single structure and the default ladders.
    pub fn single(p_y: usize, p_f: usize, k: usize) -> Self {
        Grid { p_y: vec![p_y], p_f: vec![p_f], k: vec![k], ..Grid::default() }
    }

    pub fn with_ladder_points(mut self, points: usize) -> Self {
        self.ridge_lambda = log_ladder(-4.0, 2.0, points);
        self.en_lambda = log_ladder(-3.0, 0.0, points);
        self.krr_lambda = log_ladder(-5.0, 0.0, points);
        self
    }

    /// Lag/factor structures searched by models in `env`, in grid order.
    pub fn structures(&self, env: Environment) -> Vec<HyperPoint> {
        let mut out = Vec::new();
        for &p_y in &self.p_y {
            match env {
                Environment::DataPoor => out.push(HyperPoint::structure(p_y, 0, 0)),
                Environment::Ardi => {
                    for &p_f in &self.p_f {
                        for &k in &self.k {
                            out.push(HyperPoint::structure(p_y, p_f, k));
                        }
                    }
                }
                Environment::Rotated(_) => {
                    for &p_f in &self.p_f {
                        out.push(HyperPoint::structure(p_y, p_f, 0));
                    }
                }
            }
        }
        out
    }

    /// Continuous hyperparameter points for `est`, in grid order.
    pub fn continuous(&self, est: Estimator, s: &LadderScale) -> Vec<HyperPoint> {
        let base = HyperPoint::structure(0, 0, 0);
        let n = s.n.max(1) as f64;
        let sd = if s.y_sd > 0.0 { s.y_sd } else { 1.0 };
        let ridge = |alpha: Option<f64>| -> Vec<HyperPoint> {
            self.ridge_lambda.iter().map(|m| HyperPoint { lambda: Some(m * n), alpha, ..base }).collect()
        };
        let en = |a: f64| -> Vec<HyperPoint> {
            if a == 0.0 {
                return ridge(Some(0.0));
            }
            let lmax = if s.zty_max > 0.0 { 2.0 * s.zty_max / a } else { 1.0 };
            self.en_lambda.iter().map(|m| HyperPoint { lambda: Some(m * lmax), alpha: Some(a), ..base }).collect()
        };
        let svr = |sigma: Option<f64>| -> Vec<HyperPoint> {
            let mut out = Vec::new();
            for c in &self.svr_c {
                for e in &self.svr_epsilon {
                    out.push(HyperPoint { c: Some(c * 3.0 * sd), epsilon: Some(e * sd), sigma, ..base });
                }
            }
            out
        };
        let root_d = (s.d.max(1) as f64).sqrt();
        match est {
            Estimator::Ols | Estimator::RandomForest => vec![base],
            Estimator::Ridge => ridge(None),
            Estimator::ElasticNet { alpha: Some(a) } => en(a),
            Estimator::ElasticNet { alpha: None } => self.alpha.iter().flat_map(|&a| en(a)).collect(),
            Estimator::KernelRidge => self
                .sigma
                .iter()
                .flat_map(|sg| {
                    self.krr_lambda
                        .iter()
                        .map(move |m| HyperPoint { sigma: Some(sg * root_d), lambda: Some(m * n), ..base })
                })
                .collect(),
            Estimator::SvrLinear => svr(None),
            Estimator::SvrRbf => self.sigma.iter().flat_map(|sg| svr(Some(sg * root_d))).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoredPoint {
    pub point: HyperPoint,
    pub score: f64,
}

/// A frozen hyperparameter choice.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TuneDecision {
    pub chosen: HyperPoint,
    pub score_table: Vec<ScoredPoint>,
    pub decided_at: Month,
    pub frozen_until: Month,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TuneRequest {
    /// Information limit (row index) of the tuning exercise.
    pub origin: usize,
    pub seed: u64,
    pub folds: usize,
    pub settings: ModelSettings,
    /// Months a decision stays frozen.
    pub refresh_months: usize,
    /// Share of training rows used for POOS validation.
    pub validation_share: f64,
}

impl TuneRequest {
    pub fn new(origin: usize, seed: u64) -> Self {
        TuneRequest {
            origin,
            seed,
            folds: 5,
            settings: ModelSettings::default(),
            refresh_months: REFRESH_MONTHS,
            validation_share: POOS_VALIDATION_SHARE,
        }
    }
}

/// Select hyperparameters for `spec` with its own tuner.
pub fn tune(spec: &ModelSpec, grid: &Grid, src: &dyn DesignSource, req: &TuneRequest) -> Result<TuneDecision> {
    match spec.tuner {
        Tuner::Aic | Tuner::Bic => tune_ic(spec, grid, src, req),
        Tuner::PoosCv => poos_cv(spec, grid, src, req),
        Tuner::KFoldCv => kfold_cv(spec, grid, src, req),
    }
}

pub(crate) fn complete(z: DMatrix<f64>, y: DVector<f64>) -> (DMatrix<f64>, DVector<f64>) {
    let keep: Vec<usize> = (0..y.len())
        .filter(|&i| y[i].is_finite() && z.row(i).iter().all(|v| v.is_finite()))
        .collect();
    if keep.len() == y.len() {
        (z, y)
    } else {
        (select_rows(&z, &keep), select_entries(&y, &keep))
    }
}

struct Scored {
    point: HyperPoint,
    width: usize,
    score: f64,
}

/// Lowest score; ties go to fewer columns, then the earlier grid point.
fn decide(scored: Vec<Scored>, decided_at: Month, refresh_months: usize) -> Result<TuneDecision> {
    let key = |s: &Scored| if s.score.is_nan() { f64::INFINITY } else { s.score };
    let best = scored
        .iter()
        .enumerate()
        .min_by(|(i, a), (j, b)| key(a).total_cmp(&key(b)).then(a.width.cmp(&b.width)).then(i.cmp(j)))
        .map(|(i, _)| i)
        .ok_or_else(|| Error::Argument("empty grid".into()))?;
    if !key(&scored[best]).is_finite() {
        return Err(Error::Argument("no grid point could be fitted".into()));
    }
    Ok(TuneDecision {
        chosen: scored[best].point,
        score_table: scored.iter().map(|s| ScoredPoint { point: s.point, score: s.score }).collect(),
        decided_at,
        frozen_until: decided_at.add(refresh_months.max(1) as i32 - 1),
    })
}

fn check_estimator(spec: &ModelSpec, criterion: Tuner) -> Result<()> {
    if !spec.supports_ic() {
        return Err(Error::UnsupportedCriterion {
            criterion: criterion.label().into(),
            family: format!("{:?}", spec.estimator),
        });
    }
    Ok(())
}

/// AIC/BIC on the predictive regression, all structures sharing the same rows.
pub fn tune_ic(spec: &ModelSpec, grid: &Grid, src: &dyn DesignSource, req: &TuneRequest) -> Result<TuneDecision> {
    check_estimator(spec, spec.tuner)?;
    let rows = src.training_rows(req.origin);
    let structures = grid.structures(spec.environment);
    let scored: Vec<Scored> = structures
        .par_iter()
        .map(|st| {
            let design = st.design(spec.environment);
            let width = design.width(src.n_series());
            let score = (|| {
                let (z, y) = complete_design(src, &design, req.origin, &rows)?;
                let m = Ols::default().fit(&z, &y)?;
                crate::models::pipeline::FittedModel::Linear(m).information_criterion(&z, &y, spec.tuner)
            })()
            .unwrap_or_else(|e| {
                log::debug!("{} {:?}: {e}", spec.name, st);
                f64::INFINITY
            });
            Scored { point: *st, width, score }
        })
        .collect();
    decide(scored, src.date(req.origin), req.refresh_months)
}

fn complete_design(
    src: &dyn DesignSource,
    design: &DesignSpec,
    info_end: usize,
    rows: &[usize],
) -> Result<(DMatrix<f64>, DVector<f64>)> {
    let (z, y) = src.design(design, info_end, rows)?;
    Ok(complete(z, y))
}

/// Random partition of `0..n` into `k` folds whose sizes differ by at most one.
pub fn kfold_partition(n: usize, k: usize, seed: u64) -> Result<Vec<Vec<usize>>> {
    if k < 2 {
        return Err(Error::Argument(format!("K-fold needs at least 2 folds, got {k}")));
    }
    let mut perm: Vec<usize> = (0..n).collect();
    perm.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let mut folds = vec![Vec::new(); k];
    for (i, &r) in perm.iter().enumerate() {
        folds[i % k].push(r);
    }
    for f in &mut folds {
        f.sort_unstable();
    }
    Ok(folds)
}

/// Continuous points for one structure, scaled on the full tuning window.
fn ladder_for(
    est: Estimator,
    grid: &Grid,
    design: &DesignSpec,
    z: &DMatrix<f64>,
    y: &DVector<f64>,
) -> Result<Vec<HyperPoint>> {
    let pre = Preprocessor::fit(z, design.rotation == Rotation::B3)?;
    Ok(grid.continuous(est, &LadderScale::measure(&pre.transform(z), y)))
}

/// Squared-error sums of every point in `cont` on one train/test split.
#[allow(clippy::too_many_arguments)]
fn split_sse(
    est: Estimator,
    design: &DesignSpec,
    cont: &[HyperPoint],
    (ztr, ytr): (&DMatrix<f64>, &DVector<f64>),
    (zte, yte): (&DMatrix<f64>, &DVector<f64>),
    settings: &ModelSettings,
    seed: u64,
) -> Result<Vec<f64>> {
    let pre = Preprocessor::fit(ztr, design.rotation == Rotation::B3)?;
    let preds = fit_predict_many(est, cont, &pre.transform(ztr), ytr, &pre.transform(zte), settings, seed)?;
    Ok(preds.iter().map(|p| (yte - p).norm_squared()).collect())
}

fn k_scores(
    spec: &ModelSpec,
    grid: &Grid,
    src: &dyn DesignSource,
    req: &TuneRequest,
    st: &HyperPoint,
    idx: usize,
    rows: &[usize],
    folds: &[Vec<usize>],
) -> Result<Vec<(HyperPoint, f64)>> {
    let design = st.design(spec.environment);
    let (z_all, y_all) = src.design(&design, req.origin, rows)?;
    let ok: Vec<bool> = (0..rows.len())
        .map(|i| y_all[i].is_finite() && z_all.row(i).iter().all(|v| v.is_finite()))
        .collect();
    let all: Vec<usize> = (0..rows.len()).filter(|&i| ok[i]).collect();
    let cont = ladder_for(spec.estimator, grid, &design, &select_rows(&z_all, &all), &select_entries(&y_all, &all))?;
    let mut total = vec![0.0; cont.len()];
    let mut used = 0usize;
    for (f, fold) in folds.iter().enumerate() {
        let mut in_fold = vec![false; rows.len()];
        for &i in fold {
            in_fold[i] = true;
        }
        let test: Vec<usize> = fold.iter().copied().filter(|&i| ok[i]).collect();
        let train: Vec<usize> = all.iter().copied().filter(|&i| !in_fold[i]).collect();
        if test.is_empty() {
            continue;
        }
        let seed = derive_seed(req.seed, &["kfold", &idx.to_string(), &f.to_string()]);
        let sse = split_sse(
            spec.estimator,
            &design,
            &cont,
            (&select_rows(&z_all, &train), &select_entries(&y_all, &train)),
            (&select_rows(&z_all, &test), &select_entries(&y_all, &test)),
            &req.settings,
            seed,
        )?;
        for (t, s) in total.iter_mut().zip(sse) {
            *t += s / test.len() as f64;
        }
        used += 1;
    }
    if used == 0 {
        return Err(Error::Argument("every fold is empty".into()));
    }
    Ok(cont.iter().zip(total).map(|(c, t)| (st.with(c), t / used as f64)).collect())
}

/// Average held-out MSE over `req.folds` random folds of the training rows.
pub fn kfold_cv(spec: &ModelSpec, grid: &Grid, src: &dyn DesignSource, req: &TuneRequest) -> Result<TuneDecision> {
    let k = req.folds;
    if k < 2 {
        return Err(Error::Argument(format!("K-fold needs at least 2 folds, got {k}")));
    }
    let rows = src.training_rows(req.origin);
    if rows.len() < 5 * k {
        return Err(Error::Argument(format!("{} training rows, K-fold with k={k} needs {}", rows.len(), 5 * k)));
    }
    let folds = kfold_partition(rows.len(), k, derive_seed(req.seed, &["partition"]))?;
    run_search(spec, grid, src, req, |st, idx| k_scores(spec, grid, src, req, st, idx, &rows, &folds))
}

/// Validation rows of a POOS exercise: the last `share` of `n` training rows.
pub fn poos_validation_len(n: usize, share: f64) -> usize {
    (n as f64 * share).round() as usize
}

fn poos_scores(
    spec: &ModelSpec,
    grid: &Grid,
    src: &dyn DesignSource,
    req: &TuneRequest,
    st: &HyperPoint,
    idx: usize,
    rows: &[usize],
    val: &[usize],
) -> Result<Vec<(HyperPoint, f64)>> {
    let design = st.design(spec.environment);
    let (z, y) = complete_design(src, &design, req.origin, rows)?;
    let cont = ladder_for(spec.estimator, grid, &design, &z, &y)?;
    let mut sse = vec![0.0; cont.len()];
    let mut count = 0usize;
    for (b, block) in val.chunks(12).enumerate() {
        let e = block[0];
        let train = src.training_rows(e);
        let (ztr, ytr) = complete_design(src, &design, e, &train)?;
        let (zte, yte) = complete_design(src, &design, e, block)?;
        if yte.is_empty() {
            continue;
        }
        let seed = derive_seed(req.seed, &["poos", &idx.to_string(), &b.to_string()]);
        let s = split_sse(spec.estimator, &design, &cont, (&ztr, &ytr), (&zte, &yte), &req.settings, seed)?;
        for (t, v) in sse.iter_mut().zip(s) {
            *t += v;
        }
        count += yte.len();
    }
    if count == 0 {
        return Err(Error::Argument("no usable validation rows".into()));
    }
    Ok(cont.iter().zip(sse).map(|(c, s)| (st.with(c), s / count as f64)).collect())
}

/// Pseudo-out-of-sample CV over the last 25% of the training rows, with the
/// model re-estimated every 12 months on data ending `h` months before each
/// validation target.
pub fn poos_cv(spec: &ModelSpec, grid: &Grid, src: &dyn DesignSource, req: &TuneRequest) -> Result<TuneDecision> {
    let rows = src.training_rows(req.origin);
    let n = rows.len();
    if n < POOS_MIN_TRAIN {
        return Err(Error::Argument(format!("POOS-CV needs {POOS_MIN_TRAIN} training rows, got {n}")));
    }
    let h = src.horizon();
    let n_val = poos_validation_len(n, req.validation_share);
    if n_val < h + 12 {
        return Err(Error::Argument(format!("validation window of {n_val} rows is shorter than h+12={}", h + 12)));
    }
    let val = &rows[n - n_val..];
    run_search(spec, grid, src, req, |st, idx| poos_scores(spec, grid, src, req, st, idx, &rows, val))
}

fn run_search<F>(
    spec: &ModelSpec,
    grid: &Grid,
    src: &dyn DesignSource,
    req: &TuneRequest,
    score: F,
) -> Result<TuneDecision>
where
    F: Fn(&HyperPoint, usize) -> Result<Vec<(HyperPoint, f64)>> + Sync,
{
    let structures = grid.structures(spec.environment);
    let per: Vec<Vec<Scored>> = structures
        .par_iter()
        .enumerate()
        .map(|(idx, st)| {
            let width = st.design(spec.environment).width(src.n_series());
            match score(st, idx) {
                Ok(v) => v.into_iter().map(|(point, score)| Scored { point, width, score }).collect(),
                Err(e) => {
                    log::debug!("{} {:?}: {e}", spec.name, st);
                    vec![Scored { point: *st, width, score: f64::INFINITY }]
                }
            }
        })
        .collect();
    decide(per.into_iter().flatten().collect(), src.date(req.origin), req.refresh_months)
}

#[cfg(test)]
mod tests;
