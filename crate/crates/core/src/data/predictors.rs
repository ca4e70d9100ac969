//! Lagged predictor sets and the shrinkage rotations.
//!
//! * `None`: own lags, plus `K` factors and their lags when factors are given.
//! * `B1`: own lags plus lags of every (standardized) raw series.
//! * `B2`: own lags plus lags of all principal components of the panel.
//! * `B3`: all principal components of the full lagged block `[own lags, X lags]`.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::data::factors::{extract_factors, FactorSet};
use crate::date::Month;
use crate::error::{Error, Result};
use crate::linalg::Standardization;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Rotation {
    None,
    B1,
    B2,
    B3,
}

/// Lag layout of one design matrix.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct DesignSpec {
    pub p_y: usize,
    pub p_f: usize,
    /// Number of factors used when `rotation == None`; zero for data-poor sets.
    pub n_factors: usize,
    pub rotation: Rotation,
}

impl DesignSpec {
    pub fn data_poor(p_y: usize) -> Self {
        DesignSpec { p_y, p_f: 0, n_factors: 0, rotation: Rotation::None }
    }

    pub fn ardi(p_y: usize, p_f: usize, k: usize) -> Self {
        DesignSpec { p_y, p_f, n_factors: k, rotation: Rotation::None }
    }

    pub fn max_lag(&self) -> usize {
        self.p_y.max(if self.uses_panel() { self.p_f } else { 0 })
    }

    pub fn uses_panel(&self) -> bool {
        self.n_factors > 0 || self.rotation != Rotation::None
    }

    /// Column count of the raw (pre-rotation) design with `n_series` panel columns.
    pub fn width(&self, n_series: usize) -> usize {
        let own = self.p_y + 1;
        match self.rotation {
            Rotation::None => own + (self.p_f + 1) * self.n_factors,
            Rotation::B1 | Rotation::B2 | Rotation::B3 => own + (self.p_f + 1) * n_series,
        }
    }
}

/// Columns the design builder may draw from; every matrix is aligned to the
/// same row/date index as `own`.
pub struct LagSources<'a> {
    pub own: &'a [f64],
    /// Factor scores (ARDI uses the first `n_factors`, `B2` uses all).
    pub factors: Option<&'a DMatrix<f64>>,
    /// Standardized panel, used by `B1`/`B3`.
    pub panel: Option<&'a DMatrix<f64>>,
}

/// Build raw design rows for the requested positions. Entries depending on
/// missing data are NaN; positions with insufficient history are an error.
pub fn build_design(src: &LagSources<'_>, spec: &DesignSpec, rows: &[usize]) -> Result<DMatrix<f64>> {
    let block: Option<&DMatrix<f64>> = match spec.rotation {
        Rotation::None if spec.n_factors > 0 => {
            let f = src.factors.ok_or_else(|| Error::Argument("factor lags requested without factors".into()))?;
            if f.ncols() < spec.n_factors {
                return Err(Error::Argument(format!(
                    "{} factors requested, {} available",
                    spec.n_factors,
                    f.ncols()
                )));
            }
            Some(f)
        }
        Rotation::None => None,
        Rotation::B1 | Rotation::B3 => Some(
            src.panel
                .ok_or_else(|| Error::Argument(format!("rotation {:?} requires the raw panel", spec.rotation)))?,
        ),
        Rotation::B2 => Some(
            src.factors
                .ok_or_else(|| Error::Argument("rotation B2 requires all principal components".into()))?,
        ),
    };
    let block_cols = match spec.rotation {
        Rotation::None => spec.n_factors,
        _ => block.map_or(0, |b| b.ncols()),
    };
    let width = spec.p_y + 1 + if block.is_some() { (spec.p_f + 1) * block_cols } else { 0 };
    let max_lag = spec.p_y.max(if block.is_some() { spec.p_f } else { 0 });
    let mut z = DMatrix::zeros(rows.len(), width);
    for (r, &t) in rows.iter().enumerate() {
        if t < max_lag || t >= src.own.len() {
            return Err(Error::Argument(format!("row {t} lacks {max_lag} lags of history")));
        }
        for j in 0..=spec.p_y {
            z[(r, j)] = src.own[t - j];
        }
        if let Some(b) = block {
            let mut c = spec.p_y + 1;
            for j in 0..=spec.p_f {
                for k in 0..block_cols {
                    z[(r, c)] = b[(t - j, k)];
                    c += 1;
                }
            }
        }
    }
    Ok(z)
}

/// Principal-component rotation fitted on training rows.
#[derive(Debug, Clone, PartialEq)]
pub struct PcaRotation {
    pub loadings: DMatrix<f64>,
}

/// Standardization (and, for `B3`, a full principal-component rotation followed
/// by re-standardization) fitted on training rows only.
#[derive(Debug, Clone, PartialEq)]
pub struct Preprocessor {
    pub standardization: Standardization,
    pub rotation: Option<(PcaRotation, Standardization)>,
}

impl Preprocessor {
    pub fn fit(train: &DMatrix<f64>, rotate: bool) -> Result<Self> {
        let standardization = Standardization::fit(train);
        let rotation = if rotate {
            let z = standardization.apply(train);
            let r = z.nrows().min(z.ncols());
            let fs = extract_factors(&z, r)?;
            let scores_std = Standardization::fit(&fs.factors);
            Some((PcaRotation { loadings: fs.loadings }, scores_std))
        } else {
            None
        };
        Ok(Preprocessor { standardization, rotation })
    }

    pub fn transform(&self, z: &DMatrix<f64>) -> DMatrix<f64> {
        let s = self.standardization.apply(z);
        match &self.rotation {
            Some((pca, std2)) => std2.apply(&(s * &pca.loadings)),
            None => s,
        }
    }
}

/// An aligned, standardized design for one forecast origin.
#[derive(Debug, Clone, PartialEq)]
pub struct PredictorSet {
    pub origin: Month,
    /// Dates of the training rows (predictor dates `t`, target at `t + h`).
    pub row_dates: Vec<Month>,
    /// Training design after standardization (and rotation for `B3`).
    pub design: DMatrix<f64>,
    /// Design row at the origin, transformed with the training statistics.
    pub forecast_row: DVector<f64>,
    pub n_own_lags: usize,
    pub n_factor_cols: usize,
    pub n_extra_cols: usize,
    pub standardization: Standardization,
}

impl PredictorSet {
    pub fn n_cols(&self) -> usize {
        self.design.ncols()
    }
}

/// Inputs aligned to a common monthly date index.
pub struct PredictorInputs<'a> {
    pub dates: &'a [Month],
    pub target_stationary: &'a [f64],
    /// Factor scores aligned to `dates`.
    pub factors: Option<&'a FactorSet>,
    /// Standardized panel aligned to `dates`.
    pub x: Option<&'a DMatrix<f64>>,
}

/// Assemble the predictor set for a forecast at `origin` with horizon `h`.
/// Training rows are the dates `t ≤ origin − h` with complete lag history; the
/// standardization is computed on those rows only.
pub fn assemble_predictors(
    inputs: &PredictorInputs<'_>,
    rotation: Rotation,
    p_y: usize,
    p_f: usize,
    n_factors: usize,
    origin: Month,
    h: usize,
) -> Result<PredictorSet> {
    let first = *inputs
        .dates
        .first()
        .ok_or_else(|| Error::Argument("empty date index".into()))?;
    let o = origin.since(first);
    if o < 0 || o as usize >= inputs.dates.len() {
        return Err(Error::Argument(format!("origin {origin} outside sample")));
    }
    let o = o as usize;
    let spec = DesignSpec { p_y, p_f, n_factors, rotation };
    let factor_scores = inputs.factors.map(|f| &f.factors);
    if let Some(f) = factor_scores {
        if f.nrows() != inputs.dates.len() {
            return Err(Error::Argument("factor scores not aligned with dates".into()));
        }
    }
    let src = LagSources { own: inputs.target_stationary, factors: factor_scores, panel: inputs.x };
    let lag = spec.max_lag();
    let candidates: Vec<usize> = (lag..=o.saturating_sub(h)).filter(|&t| t + h <= o).collect();
    let raw = build_design(&src, &spec, &candidates)?;
    let keep: Vec<usize> = (0..raw.nrows())
        .filter(|&r| raw.row(r).iter().all(|v| v.is_finite()))
        .collect();
    if keep.len() < 60 {
        return Err(Error::Argument(format!(
            "origin {origin} leaves {} complete training rows, need at least 60",
            keep.len()
        )));
    }
    let train = crate::linalg::select_rows(&raw, &keep);
    let pre = Preprocessor::fit(&train, rotation == Rotation::B3)?;
    let design = pre.transform(&train);
    let fc_raw = build_design(&src, &spec, &[o])?;
    if fc_raw.iter().any(|v| !v.is_finite()) {
        return Err(Error::Argument(format!("predictors missing at origin {origin}")));
    }
    let forecast_row = pre.transform(&fc_raw).row(0).transpose();
    let n_own = p_y + 1;
    let (n_factor_cols, n_extra_cols) = match rotation {
        Rotation::None => (raw.ncols() - n_own, 0),
        Rotation::B2 => (raw.ncols() - n_own, 0),
        Rotation::B1 => (0, raw.ncols() - n_own),
        Rotation::B3 => (0, design.ncols().saturating_sub(n_own)),
    };
    Ok(PredictorSet {
        origin,
        row_dates: keep.iter().map(|&r| inputs.dates[candidates[r]]).collect(),
        design,
        forecast_row,
        n_own_lags: n_own,
        n_factor_cols,
        n_extra_cols,
        standardization: pre.standardization,
    })
}
