//! Synthetic pseudo-R² panels with planted treatment effects.

use std::collections::BTreeMap;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};

use crate::date::Month;
use crate::eval::r2::ValuePanel;
use crate::eval::treatment::standardize_series;
use crate::harness::store::RecordKey;
use crate::models::spec::{find_model, ModelSpec};

#[derive(Debug, Clone, PartialEq)]
pub struct PlantedDesign {
    pub n_dates: usize,
    pub variables: Vec<String>,
    pub horizons: Vec<u32>,
    /// Linear models; each is paired with its kernel-ridge counterpart.
    pub linear: Vec<String>,
    pub nl_effect: f64,
    pub nl_noise_sd: f64,
    /// Points per standard deviation of ξ at the forecast origin.
    pub xi_effect: f64,
    pub noise_sd: f64,
    pub noise_phi: f64,
}

impl Default for PlantedDesign {
    fn default() -> Self {
        PlantedDesign {
            n_dates: 240,
            variables: vec!["INDPRO".into(), "UNRATE".into()],
            horizons: vec![1, 12],
            linear: vec!["AR,K-fold".into(), "ARDI,K-fold".into(), "AR,POOS-CV".into(), "ARDI,POOS-CV".into()],
            nl_effect: 5.0,
            nl_noise_sd: 1.0,
            xi_effect: 10.0,
            noise_sd: 5.0,
            noise_phi: 0.0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct PlantedPanel {
    pub panel: ValuePanel,
    pub models: Vec<ModelSpec>,
    /// Standardized conditioning series, keyed "XI".
    pub xi: BTreeMap<String, BTreeMap<Month, f64>>,
}

fn nl_partner(linear: &str) -> String {
    format!("KRR-{linear}")
}

/// R² = ψ_{t,v,h} + NL·(effect + ν + xi_effect·ξ_{t−h}) + AR(1) noise per series.
pub fn planted_r2_panel(design: &PlantedDesign, seed: u64) -> PlantedPanel {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let start = Month::new(1980, 1).expect("valid");
    let max_h = design.horizons.iter().copied().max().unwrap_or(1) as i32;
    let mut raw = BTreeMap::new();
    let mut x = 0.0f64;
    for k in -max_h..design.n_dates as i32 {
        let e: f64 = StandardNormal.sample(&mut rng);
        x = 0.8 * x + e;
        raw.insert(start.add(k), x);
    }
    let xi = standardize_series(&raw);
    let mut models = Vec::new();
    for l in &design.linear {
        models.push(find_model(l).expect("roster name"));
        models.push(find_model(&nl_partner(l)).expect("roster name"));
    }
    let nl_noise = Normal::new(0.0, design.nl_noise_sd).expect("sd ≥ 0");
    let mut panel = ValuePanel::new();
    for v in &design.variables {
        for &h in &design.horizons {
            let psi: Vec<f64> = (0..design.n_dates).map(|_| { let z: f64 = StandardNormal.sample(&mut rng); 20.0 * z }).collect();
            for m in &models {
                let mut u = 0.0f64;
                for t in 0..design.n_dates {
                    let e: f64 = StandardNormal.sample(&mut rng);
                    u = design.noise_phi * u + design.noise_sd * e;
                    let date = start.add(t as i32);
                    let mut r2 = psi[t] + u;
                    if m.tags.nl {
                        r2 += design.nl_effect + nl_noise.sample(&mut rng) + design.xi_effect * xi[&date.add(-(h as i32))];
                    }
                    panel.insert(RecordKey { variable: v.clone(), horizon: h, model: m.name.clone(), date }, r2);
                }
            }
        }
    }
    PlantedPanel { panel, models, xi: BTreeMap::from([("XI".to_string(), xi)]) }
}
