//! The expanding-window pseudo-out-of-sample engine.
//!
//! Phase 1 takes every hyperparameter decision on the shared 24-month
//! calendar; phase 2 walks the forecast origins, refitting each model on all
//! data up to the origin with its frozen decision.

use std::collections::BTreeMap;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::date::Month;
use crate::error::{Error, Result};
use crate::harness::config::ExperimentConfig;
use crate::harness::context::{ContextCache, ContextNeeds, VariableSource};
use crate::harness::dataset::{Dataset, TRANSFORM_ROWS};
use crate::harness::store::{ForecastRecord, ForecastStore, RecordKey};
use crate::models::pipeline::FittedPipeline;
use crate::models::spec::ModelSpec;
use crate::seed::derive_seed;
use crate::tuning::{block_origin, complete, tune, DesignSource, TuneDecision, TuneRequest};

/// Share of failed fits above which a model gets a run-level warning.
pub const FAILURE_WARN_SHARE: f64 = 0.01;

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ModelCounts {
    pub attempted: usize,
    pub failed: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunReport {
    /// Newly produced records.
    pub store: ForecastStore,
    pub skipped_existing: usize,
    /// Targets outside the data (no realized value) are not forecast.
    pub unavailable_targets: usize,
    pub tune_events: usize,
    pub counts: BTreeMap<String, ModelCounts>,
    pub elapsed_secs: f64,
}

/// Provenance written next to a store.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub config_hash: String,
    pub code_version: String,
    pub seed: u64,
    pub elapsed_secs: f64,
    pub records: usize,
    pub new_records: usize,
    pub tune_events: usize,
    pub counts: BTreeMap<String, ModelCounts>,
    pub config: ExperimentConfig,
}

impl RunManifest {
    pub fn new(cfg: &ExperimentConfig, report: &RunReport, total_records: usize) -> Result<Self> {
        Ok(RunManifest {
            config_hash: config_hash(cfg)?,
            code_version: env!("CARGO_PKG_VERSION").to_string(),
            seed: cfg.seed,
            elapsed_secs: report.elapsed_secs,
            records: total_records,
            new_records: report.store.len(),
            tune_events: report.tune_events,
            counts: report.counts.clone(),
            config: cfg.clone(),
        })
    }

    pub fn save(&self, path: impl AsRef<std::path::Path>) -> Result<()> {
        let path = path.as_ref();
        let text = serde_json::to_string_pretty(self).map_err(|e| Error::Schema(e.to_string()))?;
        std::fs::write(path, text).map_err(|e| Error::io(path, e))
    }
}

pub fn config_hash(cfg: &ExperimentConfig) -> Result<String> {
    let d = Sha256::digest(cfg.to_toml_string()?.as_bytes());
    Ok(d.iter().map(|b| format!("{b:02x}")).collect())
}

/// `<store>.manifest.json`
pub fn manifest_path(store: &std::path::Path) -> std::path::PathBuf {
    let mut s = store.as_os_str().to_owned();
    s.push(".manifest.json");
    s.into()
}

#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
struct Item {
    v: usize,
    h: usize,
    m: usize,
}

struct Ctx<'a> {
    cfg: &'a ExperimentConfig,
    data: &'a Dataset,
    specs: &'a [ModelSpec],
    cache: ContextCache<'a>,
}

impl<'a> Ctx<'a> {
    fn source(&'a self, item: Item, limit: usize) -> VariableSource<'a> {
        let var = &self.data.variables[item.v];
        VariableSource {
            dates: &self.data.dates,
            own: &var.own,
            target: &var.targets[&self.cfg.horizons[item.h]],
            n_series: self.data.names.len(),
            first_row: self.data.first_design_row(),
            limit,
            contexts: &self.cache,
        }
    }

    fn row(&self, m: Month) -> Result<usize> {
        self.data
            .row_of(m)
            .ok_or_else(|| Error::Argument(format!("{m} outside the sample {}..{}", self.data.dates[0], self.data.dates.last().expect("rows"))))
    }

    fn tune_seed(&self, item: Item, at: Month) -> u64 {
        let (var, h, spec) = self.labels(item);
        derive_seed(self.cfg.seed, &["tune", &spec.name, var, &h.to_string(), &at.to_string()])
    }

    fn labels(&self, item: Item) -> (&str, usize, &ModelSpec) {
        (&self.data.variables[item.v].name, self.cfg.horizons[item.h], &self.specs[item.m])
    }
}

fn forecast_one(ctx: &Ctx<'_>, item: Item, origin: usize, decision: &TuneDecision) -> Result<ForecastRecord> {
    let (var, h, spec) = ctx.labels(item);
    let src = ctx.source(item, origin);
    let design = decision.chosen.design(spec.environment);
    let rows = src.training_rows(origin);
    let (z, y) = src.design(&design, origin, &rows)?;
    let (z, y) = complete(z, y);
    let at = ctx.data.dates[origin];
    let seed = derive_seed(ctx.cfg.seed, &["fit", &spec.name, var, &h.to_string(), &at.to_string()]);
    let fit = FittedPipeline::fit(spec.environment, spec.estimator, &decision.chosen, &z, &y, &ctx.cfg.settings, seed)?;
    let row = src.forecast_row(&design)?;
    if row.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite(format!("predictors at origin {at}")));
    }
    let yhat = fit.predict_raw(&row)?[0];
    let actual = ctx.data.variables[item.v].targets[&h].values[origin + h];
    if !yhat.is_finite() {
        return Err(Error::NonFinite(format!("forecast at origin {at}")));
    }
    Ok(ForecastRecord::new(ctx.data.dates[origin + h], h as u32, var, &spec.name, yhat, actual, decision.decided_at))
}

/// Run every (variable, horizon, model, origin) not already in `existing`.
pub fn run_experiment(cfg: &ExperimentConfig, data: &Dataset, existing: &ForecastStore) -> Result<RunReport> {
    cfg.validate()?;
    let started = Instant::now();
    let specs = cfg.model_specs()?;
    let max_k = cfg.grid.k.iter().copied().max().unwrap_or(0);
    let needs = ContextNeeds::for_models(&specs, max_k);
    let ctx = Ctx { cfg, data, specs: &specs, cache: ContextCache::new(&data.panel, TRANSFORM_ROWS, needs, 64) };
    let r0 = ctx.row(cfg.oos_start)?;
    let r_last = data.dates.len() - 1;
    let r1 = ctx.row(cfg.oos_end).unwrap_or(r_last).min(r_last);

    // pending work, grouped by origin row
    let mut by_origin: BTreeMap<usize, Vec<Item>> = BTreeMap::new();
    let mut tune_jobs: BTreeMap<(Item, usize), ()> = BTreeMap::new();
    let mut skipped_existing = 0;
    let mut unavailable = 0;
    for v in 0..data.variables.len() {
        for (hi, &h) in cfg.horizons.iter().enumerate() {
            if r0 < h + data.first_design_row() {
                return Err(Error::Argument(format!("oos_start {} leaves no history at h={h}", cfg.oos_start)));
            }
            for m in 0..specs.len() {
                let item = Item { v, h: hi, m };
                for t in r0..=r1 {
                    let key = RecordKey {
                        variable: data.variables[v].name.clone(),
                        horizon: h as u32,
                        model: specs[m].name.clone(),
                        date: data.dates[t],
                    };
                    if existing.contains(&key) {
                        skipped_existing += 1;
                        continue;
                    }
                    if !data.variables[v].targets[&h].values[t].is_finite() {
                        unavailable += 1;
                        continue;
                    }
                    let origin = t - h;
                    by_origin.entry(origin).or_default().push(item);
                    let tune_at = block_origin(cfg.oos_start, data.dates[t], h, cfg.refresh_months);
                    tune_jobs.insert((item, ctx.row(tune_at)?), ());
                }
            }
        }
    }

    let jobs: Vec<(Item, usize)> = tune_jobs.into_keys().collect();
    log::info!("{} tuning events, {} forecast origins", jobs.len(), by_origin.len());
    let decisions: BTreeMap<(Item, usize), std::result::Result<TuneDecision, String>> = jobs
        .par_iter()
        .map(|&(item, at)| {
            let (var, h, spec) = ctx.labels(item);
            let src = ctx.source(item, at);
            let req = TuneRequest {
                origin: at,
                seed: ctx.tune_seed(item, data.dates[at]),
                folds: cfg.folds,
                settings: cfg.settings,
                refresh_months: cfg.refresh_months,
                validation_share: cfg.validation_share,
            };
            let d = tune(spec, &cfg.grid, &src, &req).map_err(|e| {
                log::warn!("tuning {} for {var} h={h} at {} failed: {e}", spec.name, data.dates[at]);
                e.to_string()
            });
            ((item, at), d)
        })
        .collect();

    let origins: Vec<(usize, Vec<Item>)> = by_origin.into_iter().collect();
    let results: Vec<Vec<(Item, std::result::Result<ForecastRecord, String>)>> = origins
        .par_iter()
        .map(|(origin, items)| {
            items
                .iter()
                .map(|&item| {
                    let h = cfg.horizons[item.h];
                    let tune_at = ctx.row(block_origin(cfg.oos_start, data.dates[origin + h], h, cfg.refresh_months));
                    let out = match tune_at.map(|r| decisions.get(&(item, r))) {
                        Ok(Some(Ok(d))) => forecast_one(&ctx, item, *origin, d).map_err(|e| e.to_string()),
                        Ok(Some(Err(e))) => Err(format!("no tuning decision: {e}")),
                        Ok(None) => Err("no tuning decision".to_string()),
                        Err(e) => Err(e.to_string()),
                    };
                    if let Err(e) = &out {
                        let (var, h, spec) = ctx.labels(item);
                        log::warn!("{} {var} h={h} origin {}: {e}", spec.name, data.dates[*origin]);
                    }
                    (item, out)
                })
                .collect()
        })
        .collect();

    let mut store = ForecastStore::new();
    let mut counts: BTreeMap<String, ModelCounts> = BTreeMap::new();
    for (item, r) in results.into_iter().flatten() {
        let c = counts.entry(specs[item.m].name.clone()).or_default();
        c.attempted += 1;
        match r {
            Ok(rec) => {
                store.insert(rec);
            }
            Err(_) => c.failed += 1,
        }
    }
    for (m, c) in &counts {
        if c.attempted > 0 && c.failed as f64 > FAILURE_WARN_SHARE * c.attempted as f64 {
            log::warn!("{m}: {} of {} forecasts failed", c.failed, c.attempted);
        }
    }
    Ok(RunReport {
        store,
        skipped_existing,
        unavailable_targets: unavailable,
        tune_events: jobs.len(),
        counts,
        elapsed_secs: started.elapsed().as_secs_f64(),
    })
}

/// [`run_experiment`] on a dedicated pool of `jobs` threads.
pub fn run_experiment_with_jobs(
    cfg: &ExperimentConfig,
    data: &Dataset,
    existing: &ForecastStore,
    jobs: usize,
) -> Result<RunReport> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| Error::Argument(format!("thread pool: {e}")))?;
    pool.install(|| run_experiment(cfg, data, existing))
}

#[cfg(test)]
mod tests;
