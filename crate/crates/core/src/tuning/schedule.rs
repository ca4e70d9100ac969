//! The re-optimization calendar (24 months by default).

use serde::{Deserialize, Serialize};

use crate::date::Month;
use crate::tuning::TuneDecision;

pub const REFRESH_MONTHS: usize = 24;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum RefreshAction {
    Reuse,
    Retune,
}

/// Retune once the last decision's freeze has run out.
pub fn refresh_schedule(history: &[TuneDecision], now: Month) -> RefreshAction {
    match history.last() {
        Some(d) if now <= d.frozen_until => RefreshAction::Reuse,
        _ => RefreshAction::Retune,
    }
}

/// Tuning origins for a run whose first evaluated target is `oos_start`.
///
/// Block `k` covers targets `oos_start + every·k ..` and is tuned at origin
/// `oos_start + every·k − h` with information up to that origin only, so every
/// model, variable and horizon is re-optimized on the same target calendar.
pub fn retune_origins(oos_start: Month, oos_end: Month, h: usize, every: usize) -> Vec<Month> {
    let mut out = Vec::new();
    let mut target = oos_start;
    while target <= oos_end {
        out.push(target.add(-(h as i32)));
        target = target.add(every as i32);
    }
    out
}

/// The tuning origin whose block contains the target dated `target`.
pub fn block_origin(oos_start: Month, target: Month, h: usize, every: usize) -> Month {
    let every = every as i32;
    let k = target.since(oos_start).max(0) / every;
    oos_start.add(k * every - h as i32)
}
