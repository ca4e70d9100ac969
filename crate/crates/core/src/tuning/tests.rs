use super::*;
use crate::data::predictors::{build_design, LagSources};
use crate::models::pipeline::FittedPipeline;
use crate::models::spec::find_model;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

/// Own lags of a simulated series; the target of row `t` is `y[t + h]`.
struct OwnLags {
    y: Vec<f64>,
    h: usize,
    first: usize,
}

impl DesignSource for OwnLags {
    fn horizon(&self) -> usize {
        self.h
    }
    fn date(&self, row: usize) -> Month {
        Month::new(1960, 1).unwrap().add(row as i32)
    }
    fn n_series(&self) -> usize {
        0
    }
    fn training_rows(&self, info_end: usize) -> Vec<usize> {
        (self.first..self.y.len()).filter(|&t| t + self.h <= info_end).collect()
    }
    fn design(&self, s: &DesignSpec, _info_end: usize, rows: &[usize]) -> Result<(DMatrix<f64>, DVector<f64>)> {
        let z = build_design(&LagSources { own: &self.y, factors: None, panel: None }, s, rows)?;
        let y = DVector::from_iterator(rows.len(), rows.iter().map(|&t| self.y.get(t + self.h).copied().unwrap_or(f64::NAN)));
        Ok((z, y))
    }
}

/// A fixed regression problem; the lag structure is ignored.
struct Fixed {
    x: DMatrix<f64>,
    y: DVector<f64>,
}

impl DesignSource for Fixed {
    fn horizon(&self) -> usize {
        1
    }
    fn date(&self, row: usize) -> Month {
        Month::new(1960, 1).unwrap().add(row as i32)
    }
    fn n_series(&self) -> usize {
        0
    }
    fn training_rows(&self, info_end: usize) -> Vec<usize> {
        (0..self.y.len().min(info_end)).collect()
    }
    fn design(&self, _: &DesignSpec, _: usize, rows: &[usize]) -> Result<(DMatrix<f64>, DVector<f64>)> {
        Ok((select_rows(&self.x, rows), select_entries(&self.y, rows)))
    }
}

fn ar_series(coefs: &[(usize, f64)], t: usize, noise: f64, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let burn = 200;
    let mut y = vec![0.0; t + burn];
    for i in 13..t + burn {
        let e: f64 = StandardNormal.sample(&mut rng);
        y[i] = coefs.iter().map(|&(lag, c)| c * y[i - lag]).sum::<f64>() + noise * e;
    }
    y.split_off(burn)
}

fn grid_p(p: &[usize]) -> Grid {
    Grid { p_y: p.to_vec(), ..Grid::default() }
}

#[test]
fn bic_picks_true_ar_order() {
    let spec = find_model("AR,BIC").unwrap();
    // one lag (p_y = 0) against three lags (p_y = 2)
    let grid = grid_p(&[0, 2]);
    let mut hits = 0;
    for seed in 0..200 {
        let src = OwnLags { y: ar_series(&[(1, 0.6)], 412, 1.0, seed), h: 1, first: 12 };
        let d = tune_ic(&spec, &grid, &src, &TuneRequest::new(411, 0)).unwrap();
        hits += (d.chosen.p_y == 0) as usize;
    }
    assert!(hits >= 180, "BIC chose the true order in {hits}/200 samples");
}

#[test]
fn ic_refused_for_cv_models() {
    let spec = find_model("KRR-AR,K-fold").unwrap();
    let src = OwnLags { y: ar_series(&[(1, 0.5)], 200, 1.0, 0), h: 1, first: 12 };
    assert!(matches!(
        tune_ic(&spec, &grid_p(&[1]), &src, &TuneRequest::new(199, 0)),
        Err(Error::UnsupportedCriterion { .. })
    ));
}

#[test]
fn poos_selects_planted_order() {
    let spec = find_model("AR,POOS-CV").unwrap();
    for seed in 0..5 {
        // y_{t+1} depends on y_t and y_{t-3}: needs p_y = 3
        let y = ar_series(&[(1, 0.4), (4, 0.45)], 320, 1e-3, seed);
        let src = OwnLags { y, h: 1, first: 12 };
        let d = poos_cv(&spec, &grid_p(&[1, 3]), &src, &TuneRequest::new(319, 0)).unwrap();
        assert_eq!(d.chosen.p_y, 3);
        assert_eq!(d.score_table.len(), 2);
    }
}

#[test]
fn poos_validation_arithmetic_and_guards() {
    assert_eq!(poos_validation_len(200, POOS_VALIDATION_SHARE), 50);
    assert_eq!(poos_validation_len(200, 0.1), 20);
    let spec = find_model("AR,POOS-CV").unwrap();
    let src = OwnLags { y: ar_series(&[(1, 0.5)], 160, 1.0, 1), h: 24, first: 12 };
    // 124 training rows → 31 validation rows < h + 12
    assert!(matches!(poos_cv(&spec, &grid_p(&[1]), &src, &TuneRequest::new(159, 0)), Err(Error::Argument(_))));
    let src = OwnLags { y: ar_series(&[(1, 0.5)], 100, 1.0, 1), h: 1, first: 12 };
    assert!(poos_cv(&spec, &grid_p(&[1]), &src, &TuneRequest::new(99, 0)).is_err());
}

/// Every validation target lies exactly `h` or more months after the end of
/// the data used to estimate its model.
#[test]
fn poos_estimation_ends_h_before_validation_targets() {
    use std::sync::Mutex;
    struct Audit<'a> {
        inner: OwnLags,
        log: &'a Mutex<Vec<(usize, Vec<usize>)>>,
    }
    impl DesignSource for Audit<'_> {
        fn horizon(&self) -> usize {
            self.inner.h
        }
        fn date(&self, row: usize) -> Month {
            self.inner.date(row)
        }
        fn n_series(&self) -> usize {
            0
        }
        fn training_rows(&self, info_end: usize) -> Vec<usize> {
            self.inner.training_rows(info_end)
        }
        fn design(&self, s: &DesignSpec, e: usize, rows: &[usize]) -> Result<(DMatrix<f64>, DVector<f64>)> {
            self.log.lock().unwrap().push((e, rows.to_vec()));
            self.inner.design(s, e, rows)
        }
    }
    let log = Mutex::new(Vec::new());
    let h = 3;
    let src = Audit { inner: OwnLags { y: ar_series(&[(1, 0.5)], 300, 1.0, 2), h, first: 12 }, log: &log };
    let spec = find_model("AR,POOS-CV").unwrap();
    poos_cv(&spec, &grid_p(&[1]), &src, &TuneRequest::new(299, 0)).unwrap();
    let calls = log.into_inner().unwrap();
    let mut blocks = 0;
    for (e, rows) in &calls {
        if rows.len() <= 12 && *e != 299 {
            blocks += 1;
            assert_eq!(rows[0], *e, "block starts at its estimation end");
            // training calls for this block never reach past e − h
            let train = calls.iter().find(|(e2, r)| e2 == e && r.len() > 12).unwrap();
            assert!(train.1.iter().all(|&t| t + h <= *e));
        }
    }
    assert!(blocks >= 5);
}

#[test]
fn folds_are_disjoint_and_balanced() {
    let folds = kfold_partition(100, 5, 42).unwrap();
    let mut all: Vec<usize> = folds.iter().flatten().copied().collect();
    all.sort_unstable();
    assert_eq!(all, (0..100).collect::<Vec<_>>());
    assert!(folds.iter().all(|f| f.len() == 20));
    assert_eq!(folds, kfold_partition(100, 5, 42).unwrap());
    assert_ne!(folds, kfold_partition(100, 5, 43).unwrap());
    assert!(kfold_partition(100, 1, 0).is_err());
}

#[test]
fn kfold_guards_and_single_point() {
    let spec = find_model("AR,K-fold").unwrap();
    let src = OwnLags { y: ar_series(&[(1, 0.5)], 200, 1.0, 3), h: 1, first: 12 };
    let mut req = TuneRequest::new(199, 0);
    let d = kfold_cv(&spec, &grid_p(&[1]), &src, &req).unwrap();
    assert_eq!(d.chosen.p_y, 1);
    assert_eq!(d.score_table.len(), 1);
    assert_eq!(d.decided_at, src.date(199));
    req.folds = 1;
    assert!(matches!(kfold_cv(&spec, &grid_p(&[1]), &src, &req), Err(Error::Argument(_))));
    req.folds = 50;
    assert!(kfold_cv(&spec, &grid_p(&[1]), &src, &req).is_err());
}

#[test]
fn tuning_is_deterministic() {
    let spec = find_model("RFAR,K-fold").unwrap();
    let src = OwnLags { y: ar_series(&[(1, 0.5)], 150, 1.0, 4), h: 1, first: 12 };
    let mut req = TuneRequest::new(149, 11);
    req.settings.cv_trees = 20;
    let a = kfold_cv(&spec, &grid_p(&[1, 3]), &src, &req).unwrap();
    let b = kfold_cv(&spec, &grid_p(&[1, 3]), &src, &req).unwrap();
    assert_eq!(a, b);
}

#[test]
fn ties_go_to_the_smaller_structure() {
    let s = |p_y, width, score| Scored { point: HyperPoint::structure(p_y, 0, 0), width, score };
    let d = decide(vec![s(3, 4, 1.0), s(1, 2, 1.0), s(2, 2, 1.0), s(0, 1, f64::NAN)], Month::new(2000, 1).unwrap(), 24).unwrap();
    assert_eq!(d.chosen.p_y, 1);
    assert_eq!(d.frozen_until, Month::new(2001, 12).unwrap());
    assert!(decide(vec![s(0, 1, f64::INFINITY)], Month::new(2000, 1).unwrap(), 24).is_err());
}

#[test]
fn ladders_scale_with_data() {
    let g = Grid::default();
    let sc = LadderScale { n: 100, d: 4, y_sd: 2.0, zty_max: 50.0 };
    let r = g.continuous(Estimator::Ridge, &sc);
    assert_eq!(r.len(), 10);
    assert!((r[0].lambda.unwrap() - 100.0 * 1e-4).abs() < 1e-12);
    assert!((r[9].lambda.unwrap() - 100.0 * 1e2).abs() < 1e-9);
    let e = g.continuous(Estimator::ElasticNet { alpha: Some(0.5) }, &sc);
    assert!((e[9].lambda.unwrap() - 200.0).abs() < 1e-9);
    assert_eq!(g.continuous(Estimator::ElasticNet { alpha: None }, &sc).len(), 50);
    let k = g.continuous(Estimator::KernelRidge, &sc);
    assert_eq!(k.len(), 50);
    assert!((k[20].sigma.unwrap() - 2.0).abs() < 1e-12);
    assert_eq!(g.continuous(Estimator::SvrRbf, &sc).len(), 5 * 5 * 4);
    assert_eq!(g.structures(Environment::Ardi).len(), 48);
    assert_eq!(g.structures(Environment::Rotated(Rotation::B1)).len(), 16);
}

/// Lasso solution at the top of its ladder is all zeros.
#[test]
fn elastic_net_ladder_starts_at_the_null_model() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let x = DMatrix::from_fn(80, 6, |_, _| rng.gen_range(-1.0f64..1.0));
    let y = DVector::from_fn(80, |i, _| x[(i, 0)] + 0.1 * rng.gen_range(-1.0..1.0));
    let pre = Preprocessor::fit(&x, false).unwrap();
    let z = pre.transform(&x);
    let cont = Grid::default().continuous(Estimator::ElasticNet { alpha: Some(1.0) }, &LadderScale::measure(&z, &y));
    let top = cont.last().unwrap();
    let m = crate::models::ElasticNet::new(top.lambda.unwrap() * 1.0001, 1.0).fit(&z, &y).unwrap();
    assert!(m.coef.iter().all(|&b| b == 0.0));
}

/// K-fold ridge selects a penalty within one ladder step of the penalty that
/// minimizes the exact prediction risk under the Gaussian design.
#[test]
fn kfold_ridge_tracks_analytic_risk() {
    let spec = find_model("RRAR,K-fold").unwrap();
    let grid = grid_p(&[1]);
    let (n, p) = (300, 30);
    let mut within = 0;
    for seed in 0..10u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(100 + seed);
        let mut g = || -> f64 { StandardNormal.sample(&mut rng) };
        let beta: Vec<f64> = (0..p).map(|_| 0.12 * g()).collect();
        let x = DMatrix::from_fn(n, p, |_, _| g());
        let y = DVector::from_fn(n, |i, _| (0..p).map(|j| x[(i, j)] * beta[j]).sum::<f64>() + g());
        let src = Fixed { x: x.clone(), y: y.clone() };
        let d = kfold_cv(&spec, &grid, &src, &TuneRequest::new(n, seed)).unwrap();
        let chosen = d.score_table.iter().position(|s| s.point == d.chosen).unwrap();
        // E[(x'β − f̂(x))²] for x ~ N(0, I) with f̂(x) = a + x'γ
        let risks: Vec<f64> = d
            .score_table
            .iter()
            .map(|s| {
                let f = FittedPipeline::fit(spec.environment, spec.estimator, &s.point, &x, &y, &ModelSettings::default(), 0)
                    .unwrap();
                let probe = DMatrix::from_fn(p + 1, p, |i, j| if i == j + 1 { 1.0 } else { 0.0 });
                let v = f.predict_raw(&probe).unwrap();
                let a = v[0];
                a * a + (0..p).map(|j| (v[j + 1] - a - beta[j]).powi(2)).sum::<f64>()
            })
            .collect();
        let best = (0..risks.len()).min_by(|&i, &j| risks[i].total_cmp(&risks[j])).unwrap();
        within += (chosen.abs_diff(best) <= 1) as usize;
    }
    assert!(within >= 9, "chosen penalty within one step of the risk minimizer in {within}/10 samples");
}
