use super::*;
use crate::harness::synthetic::synthetic_panel;
use crate::tuning::Grid;

fn month(y: i32, m: u32) -> Month {
    Month::new(y, m).unwrap()
}

fn small_config(models: &[&str], oos_start: Month, oos_end: Month) -> ExperimentConfig {
    let mut cfg = ExperimentConfig {
        variables: vec!["INDPRO".into()],
        horizons: vec![1],
        models: models.iter().map(|s| s.to_string()).collect(),
        sample_start: Some(month(1960, 1)),
        sample_end: None,
        oos_start,
        oos_end,
        grid: Grid { p_y: vec![1, 3], p_f: vec![1], k: vec![3], ..Grid::default() }.with_ladder_points(4),
        ..ExperimentConfig::default()
    };
    cfg.grid.sigma = vec![1.0];
    cfg.settings.n_trees = 20;
    cfg.settings.cv_trees = 10;
    cfg
}

fn dataset(cfg: &ExperimentConfig, n_periods: usize, seed: u64) -> Dataset {
    Dataset::build(&synthetic_panel(10, n_periods, month(1960, 1), seed), cfg).unwrap()
}

#[test]
fn twelve_origins_give_twelve_records() {
    let cfg = small_config(&["AR,BIC"], month(1980, 1), month(1980, 12));
    let data = dataset(&cfg, 260, 1);
    let rep = run_experiment(&cfg, &data, &ForecastStore::new()).unwrap();
    assert_eq!(rep.store.len(), 12);
    assert_eq!(rep.counts["AR,BIC"].failed, 0);
    let r = rep.store.iter().next().unwrap();
    assert_eq!(r.date, month(1980, 1));
    assert_eq!(r.tune_vintage, month(1979, 12));
    assert!((r.e - (r.y - r.yhat)).abs() == 0.0);
}

#[test]
fn full_evaluation_window_has_456_periods() {
    let mut cfg = small_config(&["AR,BIC"], month(1980, 1), month(2017, 12));
    cfg.horizons = vec![1, 12];
    let data = dataset(&cfg, 696, 2);
    let rep = run_experiment(&cfg, &data, &ForecastStore::new()).unwrap();
    assert_eq!(rep.store.series("INDPRO", 1, "AR,BIC").len(), 456);
    assert_eq!(rep.store.series("INDPRO", 12, "AR,BIC").len(), 456);
    assert_eq!(rep.tune_events, 2 * 19);
    // tuning vintages sit on the shared 24-month calendar
    let v: Vec<Month> = rep.store.series("INDPRO", 12, "AR,BIC").iter().map(|r| r.tune_vintage).collect();
    assert_eq!(v[0], month(1979, 1));
    assert_eq!(v[24], month(1981, 1));
}

#[test]
fn rerun_is_byte_identical_across_thread_counts_and_resumes() {
    let cfg = small_config(&["AR,K-fold", "KRR-ARDI,K-fold", "RFARDI,POOS-CV"], month(1982, 1), month(1982, 6));
    let data = dataset(&cfg, 290, 3);
    let a = run_experiment_with_jobs(&cfg, &data, &ForecastStore::new(), 1).unwrap();
    let b = run_experiment_with_jobs(&cfg, &data, &ForecastStore::new(), 4).unwrap();
    assert_eq!(a.store.len(), 18);
    assert_eq!(a.store.to_bytes(), b.store.to_bytes());
    let again = run_experiment(&cfg, &data, &a.store).unwrap();
    assert!(again.store.is_empty());
    assert_eq!(again.skipped_existing, 18);
    assert_eq!(again.tune_events, 0);
}

#[test]
fn forecasts_ignore_data_after_their_origin() {
    let cfg = small_config(&["ARDI,BIC", "KRR-ARDI,K-fold"], month(1982, 1), month(1983, 12));
    let raw = synthetic_panel(10, 300, month(1960, 1), 4);
    let base = run_experiment(&cfg, &Dataset::build(&raw, &cfg).unwrap(), &ForecastStore::new()).unwrap();
    let cut = raw.row_of(month(1983, 3)).unwrap();
    let mut bent = raw.clone();
    for t in cut..bent.values.nrows() {
        for j in 0..bent.values.ncols() {
            bent.values[(t, j)] *= 1.5;
        }
    }
    let other = run_experiment(&cfg, &Dataset::build(&bent, &cfg).unwrap(), &ForecastStore::new()).unwrap();
    let mut compared = 0;
    for r in base.store.iter() {
        let s = other.store.get(&r.key()).unwrap();
        // origin = date − 1 < cut
        if r.date.add(-1) < month(1983, 3) {
            assert_eq!(r.yhat.to_bits(), s.yhat.to_bits(), "{} {}", r.model, r.date);
            compared += 1;
        }
    }
    assert_eq!(compared, 2 * 15);
}

#[test]
fn training_window_expands_one_row_per_month() {
    let cfg = small_config(&["AR,BIC"], month(1980, 1), month(1980, 12));
    let data = dataset(&cfg, 260, 5);
    let ctx = Ctx { cfg: &cfg, data: &data, specs: &cfg.model_specs().unwrap(), cache: ContextCache::new(&data.panel, 2, ContextNeeds::default(), 4) };
    let item = Item { v: 0, h: 0, m: 0 };
    let a = ctx.source(item, 230).training_rows(230).len();
    let b = ctx.source(item, 237).training_rows(237).len();
    assert_eq!(b - a, 7);
}

#[test]
fn manifest_round_trip() {
    let cfg = small_config(&["AR,BIC"], month(1980, 1), month(1980, 3));
    let data = dataset(&cfg, 260, 6);
    let rep = run_experiment(&cfg, &data, &ForecastStore::new()).unwrap();
    let m = RunManifest::new(&cfg, &rep, rep.store.len()).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let p = manifest_path(&dir.path().join("store.bin"));
    assert!(p.to_string_lossy().ends_with("store.bin.manifest.json"));
    m.save(&p).unwrap();
    let back: RunManifest = serde_json::from_str(&std::fs::read_to_string(&p).unwrap()).unwrap();
    assert_eq!(back.config, cfg);
    assert_eq!(back.config_hash, config_hash(&cfg).unwrap());
}

#[test]
fn refresh_interval_sets_tuning_events() {
    let mut cfg = small_config(&["AR,BIC"], month(1980, 1), month(1981, 12));
    let data = dataset(&cfg, 280, 6);
    let every_24 = run_experiment(&cfg, &data, &ForecastStore::new()).unwrap();
    cfg.refresh_months = 6;
    let every_6 = run_experiment(&cfg, &data, &ForecastStore::new()).unwrap();
    assert_eq!((every_24.tune_events, every_6.tune_events), (1, 4));
    let v = every_6.store.iter().map(|r| r.tune_vintage).collect::<std::collections::BTreeSet<_>>();
    assert_eq!(v.len(), 4);
}
