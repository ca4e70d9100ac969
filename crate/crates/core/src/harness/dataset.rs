//! The stationarized panel plus per-variable targets used by a run.

use std::collections::BTreeMap;

use nalgebra::DMatrix;

use crate::data::panel::RawPanel;
use crate::data::target::{build_named_target, stationary_own_series, TargetKind, TargetSeries};
use crate::data::transform::stationarize;
use crate::date::Month;
use crate::error::{Error, Result};
use crate::harness::config::ExperimentConfig;

/// Rows lost to the transformations (second differences need two).
pub const TRANSFORM_ROWS: usize = 2;
/// Longest lag in any grid; every design starts this many rows after the
/// first transformed row so that all structures share their sample.
pub const MAX_LAG: usize = 12;

/// Default target definition from a series' transformation code.
pub fn default_target_kind(tcode: u8) -> TargetKind {
    match tcode {
        1 => TargetKind::LevelI0,
        2 | 3 => TargetKind::AvgDiff,
        _ => TargetKind::AvgLogGrowth,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct VariableData {
    pub name: String,
    pub kind: TargetKind,
    pub scale: f64,
    /// One-period stationary series used for own lags (scaled like the target).
    pub own: Vec<f64>,
    pub targets: BTreeMap<usize, TargetSeries>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub dates: Vec<Month>,
    pub names: Vec<String>,
    /// Stationarized panel, NaN where undefined.
    pub panel: DMatrix<f64>,
    pub variables: Vec<VariableData>,
}

impl Dataset {
    pub fn build(raw: &RawPanel, cfg: &ExperimentConfig) -> Result<Self> {
        let mut raw = raw.clone();
        let start = cfg.sample_start.unwrap_or(raw.dates[0]);
        let end = cfg.sample_end.unwrap_or(*raw.dates.last().expect("validated panel has rows"));
        if start != raw.dates[0] || end != *raw.dates.last().expect("rows") {
            raw = raw.slice(start, end)?;
        }
        raw.validate()?;
        let panel = stationarize(&raw)?;
        let mut variables = Vec::new();
        for v in &cfg.variables {
            let j = raw
                .column_index(v)
                .ok_or_else(|| Error::Argument(format!("variable {v} not in panel")))?;
            let o = cfg.target_for(v);
            let kind = o.kind.unwrap_or_else(|| default_target_kind(raw.tcodes[j]));
            let scale = o.scale.unwrap_or(cfg.target_scale);
            let levels: Vec<f64> = raw.values.column(j).iter().copied().collect();
            let own: Vec<f64> = stationary_own_series(&levels, kind)?.iter().map(|x| x * scale).collect();
            let mut targets = BTreeMap::new();
            for &h in &cfg.horizons {
                let mut t = build_named_target(v, &levels, kind, h)?;
                t.values.iter_mut().for_each(|x| *x *= scale);
                targets.insert(h, t);
            }
            variables.push(VariableData { name: v.clone(), kind, scale, own, targets });
        }
        Ok(Dataset { dates: raw.dates.clone(), names: raw.names.clone(), panel, variables })
    }

    pub fn row_of(&self, date: Month) -> Option<usize> {
        let i = date.since(self.dates[0]);
        (i >= 0 && (i as usize) < self.dates.len()).then_some(i as usize)
    }

    /// First predictor row of every design.
    pub fn first_design_row(&self) -> usize {
        TRANSFORM_ROWS + MAX_LAG
    }

    pub fn variable(&self, name: &str) -> Option<&VariableData> {
        self.variables.iter().find(|v| v.name == name)
    }
}
