//! Panel summaries estimated with information up to a given row, and the
//! design source that serves tuners and forecasters without lookahead.

use std::collections::BTreeMap;
use std::sync::{Arc, Mutex};

use nalgebra::{DMatrix, DVector};

use crate::data::factors::extract_factors;
use crate::data::predictors::{build_design, DesignSpec, LagSources, Rotation};
use crate::data::target::TargetSeries;
use crate::date::Month;
use crate::error::{Error, Result};
use crate::linalg::{select_rows, Standardization};
use crate::models::spec::{Environment, ModelSpec};
use crate::tuning::DesignSource;

/// Which panel summaries a run needs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct ContextNeeds {
    /// Number of principal components to keep (`usize::MAX` keeps all).
    pub factors: usize,
    /// Keep the standardized panel itself (B1, B3).
    pub panel: bool,
}

impl ContextNeeds {
    pub fn for_models(models: &[ModelSpec], max_k: usize) -> Self {
        let mut n = ContextNeeds::default();
        for m in models {
            match m.environment {
                Environment::DataPoor => {}
                Environment::Ardi => n.factors = n.factors.max(max_k),
                Environment::Rotated(Rotation::B2) => n.factors = usize::MAX,
                Environment::Rotated(_) => n.panel = true,
            }
        }
        n
    }

    pub fn any(&self) -> bool {
        self.factors > 0 || self.panel
    }
}

/// Standardization and principal components fitted on panel rows
/// `[window_start, info_end]`, applied to every row.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureContext {
    pub info_end: usize,
    /// Panel columns fully observed over the window.
    pub kept: Vec<usize>,
    pub panel: Option<DMatrix<f64>>,
    pub factors: Option<DMatrix<f64>>,
}

impl FeatureContext {
    pub fn build(panel: &DMatrix<f64>, window_start: usize, info_end: usize, needs: ContextNeeds) -> Result<Self> {
        if !needs.any() {
            return Ok(FeatureContext { info_end, kept: Vec::new(), panel: None, factors: None });
        }
        if info_end >= panel.nrows() || info_end < window_start {
            return Err(Error::Argument(format!("context end {info_end} outside panel")));
        }
        let window: Vec<usize> = (window_start..=info_end).collect();
        let kept: Vec<usize> = (0..panel.ncols())
            .filter(|&j| window.iter().all(|&t| panel[(t, j)].is_finite()))
            .collect();
        if kept.is_empty() {
            return Err(Error::Argument(format!("no series fully observed up to row {info_end}")));
        }
        let cols = panel.select_columns(kept.iter());
        let win = select_rows(&cols, &window);
        let std = Standardization::fit(&win);
        let full = std.apply(&cols);
        let factors = if needs.factors > 0 {
            let r = needs.factors.min(win.nrows()).min(win.ncols());
            let fs = extract_factors(&std.apply(&win), r)?;
            Some(&full * &fs.loadings)
        } else {
            None
        };
        Ok(FeatureContext { info_end, kept, panel: needs.panel.then_some(full), factors })
    }
}

/// Contexts keyed by their information limit, shared across threads.
pub struct ContextCache<'a> {
    panel: &'a DMatrix<f64>,
    window_start: usize,
    needs: ContextNeeds,
    capacity: usize,
    map: Mutex<BTreeMap<usize, Arc<FeatureContext>>>,
}

impl<'a> ContextCache<'a> {
    pub fn new(panel: &'a DMatrix<f64>, window_start: usize, needs: ContextNeeds, capacity: usize) -> Self {
        ContextCache { panel, window_start, needs, capacity: capacity.max(1), map: Mutex::new(BTreeMap::new()) }
    }

    pub fn needs(&self) -> ContextNeeds {
        self.needs
    }

    pub fn get(&self, info_end: usize) -> Result<Arc<FeatureContext>> {
        if let Some(c) = self.map.lock().expect("context cache poisoned").get(&info_end) {
            return Ok(c.clone());
        }
        let ctx = Arc::new(FeatureContext::build(self.panel, self.window_start, info_end, self.needs)?);
        let mut map = self.map.lock().expect("context cache poisoned");
        while map.len() >= self.capacity {
            let k = *map.keys().next().expect("non-empty");
            map.remove(&k);
        }
        map.insert(info_end, ctx.clone());
        Ok(ctx)
    }
}

/// Design rows for one (variable, horizon) with a hard information limit:
/// no row, target or panel summary dated after `limit` is ever served.
pub struct VariableSource<'a> {
    pub dates: &'a [Month],
    pub own: &'a [f64],
    pub target: &'a TargetSeries,
    pub n_series: usize,
    pub first_row: usize,
    pub limit: usize,
    pub contexts: &'a ContextCache<'a>,
}

impl VariableSource<'_> {
    fn lookahead(&self, row: usize) -> Error {
        Error::Lookahead { requested: self.date(row), origin: self.date(self.limit) }
    }

    /// The forecast row at `limit`, using panel summaries estimated up to `limit`.
    pub fn forecast_row(&self, structure: &DesignSpec) -> Result<DMatrix<f64>> {
        Ok(self.design(structure, self.limit, &[self.limit])?.0)
    }
}

impl DesignSource for VariableSource<'_> {
    fn horizon(&self) -> usize {
        self.target.h
    }

    fn date(&self, row: usize) -> Month {
        self.dates[0].add(row as i32)
    }

    fn n_series(&self) -> usize {
        self.n_series
    }

    fn training_rows(&self, info_end: usize) -> Vec<usize> {
        let end = info_end.min(self.limit);
        let h = self.target.h;
        (self.first_row..self.own.len())
            .take_while(|&t| t + h <= end)
            .filter(|&t| self.target.values[t + h].is_finite())
            .collect()
    }

    fn design(&self, structure: &DesignSpec, info_end: usize, rows: &[usize]) -> Result<(DMatrix<f64>, DVector<f64>)> {
        if info_end > self.limit {
            return Err(self.lookahead(info_end));
        }
        if let Some(&bad) = rows.iter().find(|&&t| t > self.limit) {
            return Err(self.lookahead(bad));
        }
        let ctx = if structure.uses_panel() { Some(self.contexts.get(info_end)?) } else { None };
        let src = LagSources {
            own: self.own,
            factors: ctx.as_ref().and_then(|c| c.factors.as_ref()),
            panel: ctx.as_ref().and_then(|c| c.panel.as_ref()),
        };
        let z = build_design(&src, structure, rows)?;
        let h = self.target.h;
        let y = DVector::from_iterator(
            rows.len(),
            rows.iter().map(|&t| if t + h <= self.limit { self.target.values[t + h] } else { f64::NAN }),
        );
        Ok((z, y))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::target::{build_target, TargetKind};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn panel(t: usize, n: usize, seed: u64) -> DMatrix<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        DMatrix::from_fn(t, n, |_, _| rng.gen_range(-1.0..1.0))
    }

    #[test]
    fn series_with_gaps_are_dropped_and_factors_use_window_only() {
        let mut p = panel(100, 6, 1);
        p[(50, 2)] = f64::NAN;
        let needs = ContextNeeds { factors: 3, panel: true };
        let early = FeatureContext::build(&p, 2, 40, needs).unwrap();
        assert_eq!(early.kept.len(), 6);
        let late = FeatureContext::build(&p, 2, 60, needs).unwrap();
        assert_eq!(late.kept, vec![0, 1, 3, 4, 5]);
        // changing data after the window leaves the window's factors unchanged
        let mut q = p.clone();
        for t in 41..100 {
            for j in 0..6 {
                q[(t, j)] = 5.0;
            }
        }
        let other = FeatureContext::build(&q, 2, 40, needs).unwrap();
        let f1 = early.factors.unwrap().rows(0, 41).into_owned();
        let f2 = other.factors.unwrap().rows(0, 41).into_owned();
        assert!((f1 - f2).abs().max() < 1e-12);
    }

    #[test]
    fn source_refuses_lookahead() {
        let p = panel(120, 5, 2);
        let levels: Vec<f64> = (0..120).map(|i| 100.0 + i as f64).collect();
        let target = build_target(&levels, TargetKind::AvgLogGrowth, 3).unwrap();
        let own = crate::data::target::stationary_own_series(&levels, TargetKind::AvgLogGrowth).unwrap();
        let dates: Vec<Month> = (0..120).map(|i| Month::new(1960, 1).unwrap().add(i)).collect();
        let cache = ContextCache::new(&p, 2, ContextNeeds { factors: 3, panel: false }, 4);
        let src = VariableSource { dates: &dates, own: &own, target: &target, n_series: 5, first_row: 14, limit: 80, contexts: &cache };
        let spec = DesignSpec::ardi(1, 1, 3);
        assert!(matches!(src.design(&spec, 81, &[70]), Err(Error::Lookahead { .. })));
        assert!(matches!(src.design(&spec, 80, &[81]), Err(Error::Lookahead { .. })));
        let rows = src.training_rows(80);
        assert_eq!(*rows.last().unwrap(), 77);
        assert_eq!(rows[0], 14);
        let (z, y) = src.design(&spec, 80, &[78, 80]).unwrap();
        assert_eq!(z.ncols(), 2 + 6);
        assert!(y.iter().all(|v| v.is_nan()));
        assert_eq!(src.forecast_row(&spec).unwrap().nrows(), 1);
    }
}
