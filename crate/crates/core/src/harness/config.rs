//! Experiment configuration (TOML).

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::data::target::TargetKind;
use crate::date::Month;
use crate::error::{Error, Result};
use crate::models::pipeline::ModelSettings;
use crate::models::spec::{find_model, ModelSpec};
use crate::tuning::{Grid, POOS_VALIDATION_SHARE, REFRESH_MONTHS};

/// Environment variable that relocates relative data paths.
pub const DATA_DIR_ENV: &str = "HORSERACE_DATA_DIR";

pub const STANDARD_HORIZONS: [usize; 5] = [1, 3, 9, 12, 24];

/// Per-variable override of the target definition.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TargetOverride {
    pub kind: Option<TargetKind>,
    /// Multiplies the target (e.g. 12 to annualize monthly growth).
    pub scale: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub data: PathBuf,
    pub variables: Vec<String>,
    pub horizons: Vec<usize>,
    pub models: Vec<String>,
    pub sample_start: Option<Month>,
    pub sample_end: Option<Month>,
    pub oos_start: Month,
    pub oos_end: Month,
    pub seed: u64,
    /// Minimum months between the sample start and `oos_start`.
    pub min_in_sample: usize,
    pub allow_any_horizon: bool,
    pub folds: usize,
    /// Months between hyperparameter re-optimizations.
    pub refresh_months: usize,
    /// Share of the training window held out by POOS-CV.
    pub validation_share: f64,
    /// Scale applied to every target unless overridden per variable.
    pub target_scale: f64,
    pub targets: BTreeMap<String, TargetOverride>,
    pub grid: Grid,
    pub settings: ModelSettings,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            data: PathBuf::from("data/fred-md.csv"),
            variables: vec!["INDPRO".into(), "UNRATE".into()],
            horizons: vec![1, 12],
            models: vec!["AR,BIC".into()],
            sample_start: Month::new(1960, 1),
            sample_end: Month::new(2017, 12),
            oos_start: Month::new(1980, 1).expect("valid month"),
            oos_end: Month::new(2017, 12).expect("valid month"),
            seed: 20_170_101,
            min_in_sample: 240,
            allow_any_horizon: false,
            folds: 5,
            refresh_months: REFRESH_MONTHS,
            validation_share: POOS_VALIDATION_SHARE,
            target_scale: 1.0,
            targets: BTreeMap::new(),
            grid: Grid::default(),
            settings: ModelSettings::default(),
        }
    }
}

impl ExperimentConfig {
    pub fn from_toml_str(s: &str) -> Result<Self> {
        let cfg: ExperimentConfig = toml::from_str(s).map_err(|e| Error::Schema(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Schema(e.to_string()))
    }

    /// Every problem with the configuration, reported together.
    pub fn validate(&self) -> Result<()> {
        let mut problems = Vec::new();
        if self.variables.is_empty() {
            problems.push("no variables".to_string());
        }
        if self.horizons.is_empty() {
            problems.push("no horizons".to_string());
        }
        if self.models.is_empty() {
            problems.push("no models".to_string());
        }
        for &h in &self.horizons {
            if h == 0 {
                problems.push("horizon 0".to_string());
            } else if !self.allow_any_horizon && !STANDARD_HORIZONS.contains(&h) {
                problems.push(format!("horizon {h} not in {STANDARD_HORIZONS:?} (set allow_any_horizon)"));
            }
        }
        for m in &self.models {
            if let Err(e) = find_model(m) {
                problems.push(match e {
                    Error::UnknownModel { name, .. } => format!("unknown model '{name}'"),
                    other => other.to_string(),
                });
            }
        }
        if self.oos_end < self.oos_start {
            problems.push(format!("oos_end {} precedes oos_start {}", self.oos_end, self.oos_start));
        }
        if let Some(s) = self.sample_start {
            let gap = self.oos_start.since(s);
            if gap < self.min_in_sample as i32 {
                problems.push(format!(
                    "oos_start {} is {gap} months after sample_start {s}, need {}",
                    self.oos_start, self.min_in_sample
                ));
            }
        }
        if self.folds < 2 {
            problems.push(format!("folds = {} (need at least 2)", self.folds));
        }
        if self.refresh_months == 0 {
            problems.push("refresh_months must be positive".to_string());
        }
        if !(self.validation_share > 0.0 && self.validation_share < 1.0) {
            problems.push(format!("validation_share {} outside (0, 1)", self.validation_share));
        }
        if !(self.target_scale.is_finite() && self.target_scale != 0.0) {
            problems.push("target_scale must be finite and nonzero".to_string());
        }
        for (field, v) in [
            ("p_y", self.grid.p_y.is_empty()),
            ("p_f", self.grid.p_f.is_empty()),
            ("k", self.grid.k.is_empty()),
        ] {
            if v {
                problems.push(format!("grid.{field} is empty"));
            }
        }
        if self.settings.n_trees == 0 || self.settings.cv_trees == 0 {
            problems.push("tree counts must be positive".to_string());
        }
        if problems.is_empty() {
            Ok(())
        } else {
            Err(Error::Schema(problems.join("; ")))
        }
    }

    pub fn model_specs(&self) -> Result<Vec<ModelSpec>> {
        self.models.iter().map(|m| find_model(m)).collect()
    }

    /// Data path, resolved against `HORSERACE_DATA_DIR` when relative.
    pub fn data_path(&self) -> PathBuf {
        match std::env::var_os(DATA_DIR_ENV) {
            Some(dir) if self.data.is_relative() => Path::new(&dir).join(&self.data),
            _ => self.data.clone(),
        }
    }

    pub fn target_for(&self, variable: &str) -> TargetOverride {
        self.targets.get(variable).copied().unwrap_or(TargetOverride { kind: None, scale: None })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_config_parses_with_defaults() {
        let c = ExperimentConfig::from_toml_str(
            r#"
            data = "panel.csv"
            variables = ["INDPRO"]
            horizons = [1]
            models = ["AR,BIC", "KRRARDI,K-fold"]
            oos_start = "1980-01"
            oos_end = "1980-12"

            [targets.UNRATE]
            kind = "avg_diff"
            "#,
        )
        .unwrap();
        assert_eq!(c.folds, 5);
        assert_eq!(c.settings.n_trees, 500);
        assert_eq!(c.grid.k, vec![3, 6, 10]);
        assert_eq!(c.model_specs().unwrap()[1].name, "KRR-ARDI,K-fold");
        assert_eq!(c.target_for("UNRATE").kind, Some(TargetKind::AvgDiff));
        let again = ExperimentConfig::from_toml_str(&c.to_toml_string().unwrap()).unwrap();
        assert_eq!(again, c);
    }

    #[test]
    fn all_problems_reported_together() {
        let err = ExperimentConfig::from_toml_str(
            r#"
            variables = ["INDPRO"]
            horizons = [2]
            models = ["NOPE"]
            oos_start = "1965-01"
            oos_end = "1964-01"
            "#,
        )
        .unwrap_err()
        .to_string();
        for needle in ["horizon 2", "unknown model 'NOPE'", "precedes", "need 240"] {
            assert!(err.contains(needle), "{err}");
        }
    }

    #[test]
    fn unknown_keys_rejected() {
        assert!(ExperimentConfig::from_toml_str("colour = 3").is_err());
    }
}
