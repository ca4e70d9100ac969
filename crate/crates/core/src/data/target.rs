//! Direct-forecast targets.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// How an h-step target is formed from the level series.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TargetKind {
    /// Stationary series: forecast the level itself.
    LevelI0,
    /// I(1) positive series: `(1/h) ln(Y_{t+h} / Y_t)`.
    AvgLogGrowth,
    /// I(1) series without logs: `(1/h) (Y_{t+h} − Y_t)`.
    AvgDiff,
}

impl TargetKind {
    pub fn parse(s: &str) -> Option<Self> {
        match s.to_ascii_lowercase().replace('-', "_").as_str() {
            "level_i0" | "level" | "i0" => Some(TargetKind::LevelI0),
            "avg_log_growth" | "log_growth" => Some(TargetKind::AvgLogGrowth),
            "avg_diff" | "diff" => Some(TargetKind::AvgDiff),
            _ => None,
        }
    }
}

/// `values[i]` is the target dated at sample position `i`, i.e. the value
/// forecast from origin `i − h`. Positions without an origin are NaN.
#[derive(Debug, Clone, PartialEq)]
pub struct TargetSeries {
    pub variable: String,
    pub h: usize,
    pub kind: TargetKind,
    pub values: Vec<f64>,
}

impl TargetSeries {
    /// Target value for a forecast made at sample position `origin`.
    pub fn from_origin(&self, origin: usize) -> f64 {
        self.values.get(origin + self.h).copied().unwrap_or(f64::NAN)
    }
}

/// Build the h-step target from the level series.
pub fn build_target(levels: &[f64], kind: TargetKind, h: usize) -> Result<TargetSeries> {
    build_named_target("", levels, kind, h)
}

pub fn build_named_target(
    variable: &str,
    levels: &[f64],
    kind: TargetKind,
    h: usize,
) -> Result<TargetSeries> {
    if h == 0 {
        return Err(Error::Argument("horizon must be at least 1".into()));
    }
    if kind == TargetKind::AvgLogGrowth {
        if let Some(i) = levels.iter().position(|v| v.is_finite() && *v <= 0.0) {
            return Err(Error::Domain {
                index: i,
                message: "log-growth target needs strictly positive levels".into(),
            });
        }
    }
    let n = levels.len();
    if h >= n {
        log::warn!("horizon {h} exceeds sample length {n} for '{variable}'; target is empty");
        return Ok(TargetSeries {
            variable: variable.to_string(),
            h,
            kind,
            values: Vec::new(),
        });
    }
    let hf = h as f64;
    let mut values = vec![f64::NAN; n];
    for i in h..n {
        let (now, then) = (levels[i], levels[i - h]);
        values[i] = match kind {
            TargetKind::LevelI0 => now,
            TargetKind::AvgLogGrowth => (now / then).ln() / hf,
            TargetKind::AvgDiff => (now - then) / hf,
        };
    }
    Ok(TargetSeries {
        variable: variable.to_string(),
        h,
        kind,
        values,
    })
}

/// The one-period stationary version of the target, used for own lags.
pub fn stationary_own_series(levels: &[f64], kind: TargetKind) -> Result<Vec<f64>> {
    match kind {
        TargetKind::LevelI0 => Ok(levels.to_vec()),
        _ => {
            let mut v = build_target(levels, kind, 1)?.values;
            if v.is_empty() {
                v = vec![f64::NAN; levels.len()];
            }
            Ok(v)
        }
    }
}
