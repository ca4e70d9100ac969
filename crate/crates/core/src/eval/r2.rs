//! Pseudo-out-of-sample R² (squared loss) and R¹ (absolute loss).

use std::collections::BTreeMap;

use crate::date::Month;
use crate::error::{Error, Result};
use crate::harness::store::{ForecastStore, LossKind, RecordKey};

/// One value per forecast record.
pub type ValuePanel = BTreeMap<RecordKey, f64>;

/// Realized targets per (variable, horizon), one per date.
pub fn realized_targets(store: &ForecastStore) -> BTreeMap<(String, u32), BTreeMap<Month, f64>> {
    let mut out: BTreeMap<(String, u32), BTreeMap<Month, f64>> = BTreeMap::new();
    for r in store.iter() {
        out.entry((r.variable.clone(), r.horizon)).or_default().entry(r.date).or_insert(r.y);
    }
    out
}

/// Mean loss of the unconditional-mean forecast ȳ over the evaluation sample.
pub fn benchmark_denominators(store: &ForecastStore, loss: LossKind) -> Result<BTreeMap<(String, u32), f64>> {
    realized_targets(store)
        .into_iter()
        .map(|(key, ys)| {
            let n = ys.len() as f64;
            let ybar = ys.values().sum::<f64>() / n;
            let d = ys.values().map(|y| loss.apply(y - ybar)).sum::<f64>() / n;
            if !(d > 0.0 && d.is_finite()) {
                return Err(Error::ZeroDenominator { variable: key.0, horizon: key.1 });
            }
            Ok((key, d))
        })
        .collect()
}

/// 1 − loss(e) / benchmark, per record.
pub fn pseudo_r2(store: &ForecastStore, loss: LossKind) -> Result<ValuePanel> {
    let den = benchmark_denominators(store, loss)?;
    Ok(store
        .iter()
        .map(|r| (r.key(), 1.0 - loss.apply(r.e) / den[&(r.variable.clone(), r.horizon)]))
        .collect())
}

/// Same panel in percentage points.
pub fn to_percent(panel: &ValuePanel) -> ValuePanel {
    panel.iter().map(|(k, v)| (k.clone(), 100.0 * v)).collect()
}

/// Raw loss per record, the regressand of the loss-level regression.
pub fn loss_panel(store: &ForecastStore, loss: LossKind) -> ValuePanel {
    store.iter().map(|r| (r.key(), loss.apply(r.e))).collect()
}
