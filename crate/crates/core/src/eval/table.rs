//! Relative RMSPE tables with DM significance stars and MCS membership.

use std::collections::BTreeMap;
use std::io::Write;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::date::Month;
use crate::error::{Error, Result};
use crate::eval::dm::dm_test;
use crate::eval::mcs::{model_confidence_set, McsOptions};
use crate::eval::recession::RecessionCalendar;
use crate::harness::store::{ForecastStore, LossKind};
use crate::models::spec::roster;

type Losses = BTreeMap<Month, f64>;

/// Squared errors keyed by (variable, horizon) then model.
fn loss_map(store: &ForecastStore) -> BTreeMap<(String, u32), BTreeMap<String, Losses>> {
    let mut out: BTreeMap<(String, u32), BTreeMap<String, Losses>> = BTreeMap::new();
    for r in store.iter() {
        out.entry((r.variable.clone(), r.horizon))
            .or_default()
            .entry(r.model.clone())
            .or_default()
            .insert(r.date, LossKind::Squared.apply(r.e));
    }
    out
}

/// Losses of `a` and `b` on the dates both have and `mask` accepts.
fn aligned(a: &Losses, b: &Losses, mask: &dyn Fn(Month) -> bool) -> (Vec<f64>, Vec<f64>) {
    a.iter()
        .filter(|(d, _)| mask(**d))
        .filter_map(|(d, x)| b.get(d).map(|y| (*x, *y)))
        .unzip()
}

fn rmspe(l: &[f64]) -> f64 {
    (l.iter().sum::<f64>() / l.len() as f64).sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RmspeEntry {
    /// RMSPE(m) / RMSPE(reference); `None` on an empty sample.
    pub relative: Option<f64>,
    pub rmspe: Option<f64>,
    pub n: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RmspeTable {
    pub reference: String,
    /// Keyed by (variable, horizon, model).
    pub entries: BTreeMap<(String, u32, String), RmspeEntry>,
}

impl RmspeTable {
    pub fn get(&self, variable: &str, horizon: u32, model: &str) -> Option<&RmspeEntry> {
        self.entries.get(&(variable.to_string(), horizon, model.to_string()))
    }
}

fn check_reference(store: &ForecastStore, reference: &str) -> Result<()> {
    let models = store.models();
    if !models.iter().any(|m| m == reference) {
        return Err(Error::UnknownModel { name: reference.to_string(), available: models.join("; ") });
    }
    Ok(())
}

/// Every model relative to `reference` on common dates, optionally restricted
/// to target dates accepted by `mask`.
pub fn relative_rmspe_table(
    store: &ForecastStore,
    reference: &str,
    mask: Option<&dyn Fn(Month) -> bool>,
) -> Result<RmspeTable> {
    check_reference(store, reference)?;
    let all = |_: Month| true;
    let mask = mask.unwrap_or(&all);
    let mut entries = BTreeMap::new();
    for ((v, h), models) in loss_map(store) {
        let refl = models
            .get(reference)
            .ok_or_else(|| Error::Argument(format!("reference {reference} missing for {v} h={h}")))?;
        for (m, l) in &models {
            let (a, b) = aligned(l, refl, mask);
            let entry = if a.is_empty() {
                RmspeEntry { relative: None, rmspe: None, n: 0 }
            } else {
                let (ra, rb) = (rmspe(&a), rmspe(&b));
                let relative = if m == reference { 1.0 } else { ra / rb };
                RmspeEntry { relative: Some(relative), rmspe: Some(ra), n: a.len() }
            };
            entries.insert((v.clone(), h, m.clone()), entry);
        }
    }
    Ok(RmspeTable { reference: reference.to_string(), entries })
}

pub fn stars(p: f64) -> &'static str {
    match p {
        p if p < 0.01 => "***",
        p if p < 0.05 => "**",
        p if p < 0.10 => "*",
        _ => "",
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Cell {
    pub relative: Option<f64>,
    pub stars: String,
    pub in_mcs: Option<bool>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct VariableTable {
    pub variable: String,
    pub horizons: Vec<u32>,
    pub reference: String,
    /// Absolute reference RMSPE per sample then horizon.
    pub reference_rmspe: Vec<Vec<Option<f64>>>,
    /// Model name with cells per sample then horizon.
    pub rows: Vec<(String, Vec<Vec<Cell>>)>,
}

pub const SAMPLES: [&str; 2] = ["full", "recession"];

#[derive(Debug, Clone)]
pub struct TableOptions {
    pub reference: String,
    pub mcs: McsOptions,
    pub recessions: RecessionCalendar,
}

impl Default for TableOptions {
    fn default() -> Self {
        TableOptions { reference: "AR,BIC".into(), mcs: McsOptions::default(), recessions: RecessionCalendar::nber() }
    }
}

/// Roster order first, anything else alphabetically after.
fn order_models(models: Vec<String>) -> Vec<String> {
    let pos: BTreeMap<String, usize> = roster().into_iter().enumerate().map(|(i, m)| (m.name, i)).collect();
    let mut models = models;
    models.sort_by_key(|m| (pos.get(m).copied().unwrap_or(usize::MAX), m.clone()));
    models
}

fn mcs_members(models: &BTreeMap<String, Losses>, mask: &dyn Fn(Month) -> bool, opts: &McsOptions) -> Result<BTreeMap<String, bool>> {
    let names: Vec<String> = models.keys().cloned().collect();
    let mut dates: Vec<Month> = models.values().next().map(|l| l.keys().copied().filter(|d| mask(*d)).collect()).unwrap_or_default();
    dates.retain(|d| models.values().all(|l| l.contains_key(d)));
    if dates.len() < 2 {
        return Ok(BTreeMap::new());
    }
    let losses = DMatrix::from_fn(dates.len(), names.len(), |i, j| models[&names[j]][&dates[i]]);
    let r = model_confidence_set(&names, &losses, opts)?;
    Ok(names.iter().map(|n| (n.clone(), r.contains(n, opts.alpha))).collect())
}

/// One table per variable: models in rows, (sample, horizon) in columns.
pub fn appendix_tables(store: &ForecastStore, opts: &TableOptions) -> Result<Vec<VariableTable>> {
    check_reference(store, &opts.reference)?;
    let losses = loss_map(store);
    let rec = |d: Month| opts.recessions.contains(d);
    let all = |_: Month| true;
    let masks: [&dyn Fn(Month) -> bool; 2] = [&all, &rec];
    let tables: Vec<_> = SAMPLES
        .iter()
        .zip(masks)
        .map(|(_, m)| relative_rmspe_table(store, &opts.reference, Some(m)))
        .collect::<Result<_>>()?;
    let mut out = Vec::new();
    for variable in store.variables() {
        let horizons: Vec<u32> = losses.keys().filter(|(v, _)| *v == variable).map(|(_, h)| *h).collect();
        let models = order_models(
            losses.iter().filter(|((v, _), _)| *v == variable).flat_map(|(_, ms)| ms.keys().cloned()).collect::<std::collections::BTreeSet<_>>().into_iter().collect(),
        );
        let mut cells: BTreeMap<String, Vec<Vec<Cell>>> = models.iter().map(|m| (m.clone(), vec![Vec::new(); SAMPLES.len()])).collect();
        let mut reference_rmspe = vec![Vec::new(); SAMPLES.len()];
        for (s, mask) in masks.iter().enumerate() {
            for &h in &horizons {
                let ms = &losses[&(variable.clone(), h)];
                let refl = &ms[&opts.reference];
                let members = mcs_members(ms, *mask, &opts.mcs)?;
                reference_rmspe[s].push(tables[s].get(&variable, h, &opts.reference).and_then(|e| e.rmspe));
                for m in &models {
                    let entry = tables[s].get(&variable, h, m);
                    let star = match ms.get(m) {
                        Some(l) if m != &opts.reference => {
                            let (a, b) = aligned(l, refl, *mask);
                            dm_test(&a, &b, h as usize).map(|r| stars(r.p_value)).unwrap_or("")
                        }
                        _ => "",
                    };
                    cells.get_mut(m).expect("listed")[s].push(Cell {
                        relative: entry.and_then(|e| e.relative),
                        stars: star.to_string(),
                        in_mcs: members.get(m).copied(),
                    });
                }
            }
        }
        out.push(VariableTable {
            variable,
            horizons,
            reference: opts.reference.clone(),
            reference_rmspe,
            rows: models.into_iter().map(|m| { let c = cells.remove(&m).expect("listed"); (m, c) }).collect(),
        });
    }
    Ok(out)
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|x| format!("{x:.6}")).unwrap_or_default()
}

impl VariableTable {
    pub fn header(&self) -> Vec<String> {
        let mut h = vec!["model".to_string()];
        for s in SAMPLES {
            for hz in &self.horizons {
                h.push(format!("{s}_h{hz}"));
                h.push(format!("{s}_h{hz}_stars"));
                h.push(format!("{s}_h{hz}_mcs"));
            }
        }
        h
    }

    /// First data row carries the reference's absolute RMSPE.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(self.header())?;
        let mut first = vec![format!("{} (RMSPE)", self.reference)];
        for s in &self.reference_rmspe {
            for v in s {
                first.extend([fmt_opt(*v), String::new(), String::new()]);
            }
        }
        out.write_record(&first)?;
        for (m, samples) in &self.rows {
            let mut rec = vec![m.clone()];
            for cells in samples {
                for c in cells {
                    let flag = match c.in_mcs {
                        Some(true) => "1",
                        Some(false) => "0",
                        None => "",
                    };
                    rec.extend([fmt_opt(c.relative), c.stars.clone(), flag.to_string()]);
                }
            }
            out.write_record(&rec)?;
        }
        out.flush().map_err(|e| Error::io("csv output", e))
    }
}
