//! Fixed-effects regressions of pseudo-R² on model features.

use std::collections::{BTreeMap, BTreeSet};
use std::io::Write;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::data::predictors::Rotation;
use crate::date::Month;
use crate::error::{Error, Result};
use crate::eval::dm::normal_two_sided;
use crate::eval::hac::{hac_covariance_by_time, Bandwidth};
use crate::eval::r2::ValuePanel;
use crate::eval::table::stars;
use crate::linalg::collinear_columns;
use crate::models::spec::{ModelSpec, Tuner};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Feature {
    Nl,
    Sh,
    Cv,
    Lf,
    X,
}

impl Feature {
    pub fn parse(s: &str) -> Result<Self> {
        match s.to_ascii_uppercase().as_str() {
            "NL" => Ok(Feature::Nl),
            "SH" => Ok(Feature::Sh),
            "CV" => Ok(Feature::Cv),
            "LF" => Ok(Feature::Lf),
            "X" => Ok(Feature::X),
            _ => Err(Error::Argument(format!("unknown feature {s:?}; expected NL, SH, CV, LF or X"))),
        }
    }

    /// (column, value) pairs for one model; categorical features use one
    /// column per non-baseline level.
    fn levels(self, m: &ModelSpec) -> Vec<(String, f64)> {
        let b = |v: bool| if v { 1.0 } else { 0.0 };
        match self {
            Feature::Nl => vec![("NL".into(), b(m.tags.nl))],
            Feature::Lf => vec![("LF".into(), b(m.tags.lf))],
            Feature::X => vec![("X".into(), b(m.tags.x))],
            Feature::Sh => [Rotation::B1, Rotation::B2, Rotation::B3]
                .iter()
                .map(|r| (format!("SH:{r:?}"), b(m.tags.sh && m.rotation == *r)))
                .collect(),
            Feature::Cv => [Tuner::Aic, Tuner::PoosCv, Tuner::KFoldCv]
                .iter()
                .map(|t| (format!("CV:{}", t.label()), b(m.tuner == *t)))
                .collect(),
        }
    }
}

/// Feature indicators for a model set, one row per model.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureDummies {
    pub columns: Vec<String>,
    rows: BTreeMap<String, Vec<f64>>,
}

impl FeatureDummies {
    /// Categorical levels absent from the set are left out.
    pub fn new(models: &[ModelSpec], features: &[Feature]) -> Result<Self> {
        let mut seen = BTreeSet::new();
        for m in models {
            if !seen.insert(m.name.as_str()) {
                return Err(Error::Argument(format!("model {} listed twice", m.name)));
            }
        }
        let mut columns: Vec<String> = Vec::new();
        let mut full: BTreeMap<String, Vec<f64>> = models.iter().map(|m| (m.name.clone(), Vec::new())).collect();
        for f in features {
            let per_model: Vec<Vec<(String, f64)>> = models.iter().map(|m| f.levels(m)).collect();
            let n_levels = per_model.first().map_or(0, Vec::len);
            for l in 0..n_levels {
                let categorical = n_levels > 1;
                if categorical && per_model.iter().all(|p| p[l].1 == 0.0) {
                    continue;
                }
                columns.push(per_model[0][l].0.clone());
                for (m, p) in models.iter().zip(&per_model) {
                    full.get_mut(&m.name).expect("listed").push(p[l].1);
                }
            }
        }
        Ok(FeatureDummies { columns, rows: full })
    }

    pub fn row(&self, model: &str) -> Option<&[f64]> {
        self.rows.get(model).map(Vec::as_slice)
    }

    pub fn column(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c == name)
    }

    pub fn models(&self) -> impl Iterator<Item = &String> {
        self.rows.keys()
    }
}

/// Dummy column times a dated series. With `at_origin` the series is read
/// at the forecast origin (target date − h), otherwise at the target date.
#[derive(Debug, Clone, PartialEq)]
pub struct Interaction {
    pub column: String,
    pub label: String,
    pub series: BTreeMap<Month, f64>,
    pub at_origin: bool,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct RegressionSpec {
    pub features: Vec<Feature>,
    pub interactions: Vec<Interaction>,
    pub bandwidth: Bandwidth,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalRegressionResult {
    pub names: Vec<String>,
    pub coefficients: DVector<f64>,
    pub covariance: DMatrix<f64>,
    pub n_groups: usize,
    /// Within R² of the demeaned regression.
    pub r_squared: f64,
    pub n_obs: usize,
    /// Rows lost to missing interaction values or singleton groups.
    pub dropped_rows: usize,
    pub bandwidth: usize,
    /// Residuals vanish; the covariance is zero and inference is void.
    pub degenerate: bool,
    pub residuals: DVector<f64>,
    pub groups: Vec<usize>,
}

impl EvalRegressionResult {
    pub fn index(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }

    pub fn se(&self, i: usize) -> f64 {
        self.covariance[(i, i)].max(0.0).sqrt()
    }

    pub fn p_value(&self, i: usize) -> f64 {
        let se = self.se(i);
        if se > 0.0 {
            normal_two_sided(self.coefficients[i] / se)
        } else {
            f64::NAN
        }
    }

    /// (coefficient, standard error) by name.
    pub fn estimate(&self, name: &str) -> Option<(f64, f64)> {
        self.index(name).map(|i| (self.coefficients[i], self.se(i)))
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["term", "coefficient", "se", "t", "p_value", "stars", "n_obs", "n_groups", "r_squared"])?;
        for (i, n) in self.names.iter().enumerate() {
            let (b, se, p) = (self.coefficients[i], self.se(i), self.p_value(i));
            let t = if se > 0.0 { format!("{:.6}", b / se) } else { String::new() };
            let p_text = if p.is_nan() { String::new() } else { format!("{p:.6}") };
            out.write_record([
                n.clone(),
                format!("{b:.6}"),
                format!("{se:.6}"),
                t,
                p_text,
                if p.is_nan() { String::new() } else { stars(p).to_string() },
                self.n_obs.to_string(),
                self.n_groups.to_string(),
                format!("{:.6}", self.r_squared),
            ])?;
        }
        out.flush().map_err(|e| Error::io("csv output", e))
    }
}

/// Subtract group means from every column.
pub fn demean_within(x: &DMatrix<f64>, groups: &[usize], n_groups: usize) -> DMatrix<f64> {
    let mut sums: DMatrix<f64> = DMatrix::zeros(n_groups, x.ncols());
    let mut counts = vec![0usize; n_groups];
    for (i, &g) in groups.iter().enumerate() {
        counts[g] += 1;
        for j in 0..x.ncols() {
            sums[(g, j)] += x[(i, j)];
        }
    }
    DMatrix::from_fn(x.nrows(), x.ncols(), |i, j| x[(i, j)] - sums[(groups[i], j)] / counts[groups[i]] as f64)
}

/// Within-(date, variable, horizon) OLS of `panel` on feature dummies and
/// interactions for the models in `models`. Scores are summed by target date
/// before Bartlett weighting; the lag is the rule's value, at least the
/// longest horizon minus one. The covariance carries the n / (n − G − k)
/// fixed-effects correction.
pub fn treatment_regression(panel: &ValuePanel, models: &[ModelSpec], spec: &RegressionSpec) -> Result<EvalRegressionResult> {
    let dummies = FeatureDummies::new(models, &spec.features)?;
    for (j, c) in dummies.columns.iter().enumerate() {
        let first = dummies.rows.values().next().map(|r| r[j]);
        if dummies.rows.values().all(|r| Some(r[j]) == first) {
            return Err(Error::Collinear(c.clone()));
        }
    }
    let mut names = dummies.columns.clone();
    let mut inter_cols = Vec::new();
    for it in &spec.interactions {
        let c = dummies.column(&it.column).ok_or_else(|| {
            Error::Argument(format!("interaction column {} not among {:?}", it.column, dummies.columns))
        })?;
        inter_cols.push(c);
        names.push(format!("{}*{}", it.column, it.label));
    }
    let k = names.len();
    if k == 0 {
        return Err(Error::Argument("no regressors requested".into()));
    }

    // rows in the model set with every interaction available
    let mut dropped = 0;
    let mut rows: Vec<(usize, Month, Vec<f64>, f64)> = Vec::new();
    let mut group_ids: BTreeMap<(Month, &str, u32), usize> = BTreeMap::new();
    for (key, &val) in panel {
        let Some(d) = dummies.row(&key.model) else { continue };
        let mut x = d.to_vec();
        let mut ok = val.is_finite();
        for (it, &c) in spec.interactions.iter().zip(&inter_cols) {
            let at = if it.at_origin { key.date.add(-(key.horizon as i32)) } else { key.date };
            match it.series.get(&at) {
                Some(s) if s.is_finite() => x.push(d[c] * s),
                _ => {
                    ok = false;
                    break;
                }
            }
        }
        if !ok {
            dropped += 1;
            continue;
        }
        let n = group_ids.len();
        let g = *group_ids.entry((key.date, key.variable.as_str(), key.horizon)).or_insert(n);
        rows.push((g, key.date, x, val));
    }
    let mut sizes = vec![0usize; group_ids.len()];
    for r in &rows {
        sizes[r.0] += 1;
    }
    let before = rows.len();
    rows.retain(|r| sizes[r.0] >= 2);
    dropped += before - rows.len();
    if dropped > 0 {
        log::info!("treatment regression dropped {dropped} rows");
    }
    if rows.len() <= k {
        return Err(Error::Argument(format!("{} usable rows for {k} regressors", rows.len())));
    }
    // renumber groups and periods densely
    let mut gmap: BTreeMap<usize, usize> = BTreeMap::new();
    let mut tmap: BTreeMap<Month, usize> = BTreeMap::new();
    for r in &rows {
        let n = gmap.len();
        gmap.entry(r.0).or_insert(n);
        tmap.insert(r.1, 0);
    }
    for (i, v) in tmap.values_mut().enumerate() {
        *v = i;
    }
    let groups: Vec<usize> = rows.iter().map(|r| gmap[&r.0]).collect();
    let times: Vec<usize> = rows.iter().map(|r| tmap[&r.1]).collect();
    let n = rows.len();
    let x = DMatrix::from_fn(n, k, |i, j| rows[i].2[j]);
    let y = DMatrix::from_fn(n, 1, |i, _| rows[i].3);
    let xd = demean_within(&x, &groups, gmap.len());
    let yd = demean_within(&y, &groups, gmap.len()).column(0).into_owned();

    let bad = collinear_columns(&xd, 1e-9);
    if let Some(&j) = bad.first() {
        return Err(Error::Collinear(names[j].clone()));
    }
    let xtx = xd.transpose() * &xd;
    let beta = xtx.cholesky().ok_or_else(|| Error::Collinear(names.join(", ")))?.solve(&(xd.transpose() * &yd));
    let u = &yd - &xd * &beta;
    let sst = yd.norm_squared();
    let ssr = u.norm_squared();
    let max_h = panel.keys().map(|k| k.horizon as usize).max().unwrap_or(1);
    let bandwidth = spec.bandwidth.resolve(tmap.len()).max(max_h.saturating_sub(1));
    let degenerate = ssr <= 1e-24 * sst.max(1.0) * n as f64;
    let covariance = if degenerate {
        DMatrix::zeros(k, k)
    } else {
        // degrees of freedom absorbed by the fixed effects
        let dof = n as f64 / (n - gmap.len() - k).max(1) as f64;
        hac_covariance_by_time(&xd, &u, Some((&times, tmap.len())), bandwidth)? * dof
    };
    Ok(EvalRegressionResult {
        names,
        coefficients: beta,
        covariance,
        n_groups: gmap.len(),
        r_squared: if sst > 0.0 { 1.0 - ssr / sst } else { 0.0 },
        n_obs: n,
        dropped_rows: dropped,
        bandwidth,
        degenerate,
        residuals: u,
        groups,
    })
}

/// Standardize a series to mean 0 and unit population variance. A constant
/// series maps to zeros.
pub fn standardize_series(s: &BTreeMap<Month, f64>) -> BTreeMap<Month, f64> {
    let v: Vec<f64> = s.values().copied().filter(|x| x.is_finite()).collect();
    let m = crate::linalg::mean(&v);
    let sd = crate::linalg::variance(&v).sqrt();
    s.iter().map(|(d, x)| (*d, if sd > 0.0 { (x - m) / sd } else { 0.0 })).collect()
}

/// NL treatment with NL × ξ_{j, t−h} interactions on a set of models that
/// differ only by NL. Each ξ is standardized first; an interaction that is
/// identically zero is left out.
pub fn heterogeneity_regression(
    panel: &ValuePanel,
    nl_models: &[ModelSpec],
    xi: &BTreeMap<String, BTreeMap<Month, f64>>,
    bandwidth: Bandwidth,
) -> Result<EvalRegressionResult> {
    let (with, without) = nl_models.iter().partition::<Vec<&ModelSpec>, _>(|m| m.tags.nl);
    if with.is_empty() || without.is_empty() {
        return Err(Error::Argument("heterogeneity regression needs models with and without NL".into()));
    }
    let mut interactions = Vec::new();
    for (label, series) in xi {
        let z = standardize_series(series);
        if z.values().all(|v| *v == 0.0) {
            log::warn!("conditioning series {label} is constant; interaction omitted");
            continue;
        }
        interactions.push(Interaction { column: "NL".into(), label: label.clone(), series: z, at_origin: true });
    }
    treatment_regression(panel, nl_models, &RegressionSpec { features: vec![Feature::Nl], interactions, bandwidth })
}
