//! Information criteria.

use crate::error::{Error, Result};
use crate::models::spec::Tuner;

/// Summary of a least-squares fit needed by AIC/BIC.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IcFit {
    pub ssr: f64,
    pub n_obs: usize,
    /// Parameter count including the intercept.
    pub n_params: usize,
}

/// `T ln(SSR/T) + 2k` (AIC) or `T ln(SSR/T) + k ln T` (BIC).
pub fn score_ic(fit: &IcFit, criterion: Tuner) -> Result<f64> {
    if fit.n_params == 0 {
        return Err(Error::Argument("information criterion with zero parameters".into()));
    }
    if fit.n_obs == 0 || !fit.ssr.is_finite() || fit.ssr < 0.0 {
        return Err(Error::Argument(format!("invalid fit summary {fit:?}")));
    }
    let t = fit.n_obs as f64;
    let k = fit.n_params as f64;
    let base = t * (fit.ssr / t).ln();
    match criterion {
        Tuner::Aic => Ok(base + 2.0 * k),
        Tuner::Bic => Ok(base + k * t.ln()),
        other => Err(Error::UnsupportedCriterion { criterion: other.label().into(), family: "any".into() }),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn penalty_orders_nested_fits() {
        for c in [Tuner::Aic, Tuner::Bic] {
            let small = score_ic(&IcFit { ssr: 10.0, n_obs: 100, n_params: 2 }, c).unwrap();
            let big = score_ic(&IcFit { ssr: 10.0, n_obs: 100, n_params: 4 }, c).unwrap();
            assert!(small < big);
        }
    }

    #[test]
    fn closed_form_values() {
        let f = IcFit { ssr: 50.0, n_obs: 100, n_params: 3 };
        let base = 100.0 * 0.5f64.ln();
        assert!((score_ic(&f, Tuner::Aic).unwrap() - (base + 6.0)).abs() < 1e-12);
        assert!((score_ic(&f, Tuner::Bic).unwrap() - (base + 3.0 * 100f64.ln())).abs() < 1e-12);
    }

    #[test]
    fn zero_parameters_rejected() {
        assert!(matches!(
            score_ic(&IcFit { ssr: 1.0, n_obs: 10, n_params: 0 }, Tuner::Bic),
            Err(Error::Argument(_))
        ));
        assert!(score_ic(&IcFit { ssr: 1.0, n_obs: 10, n_params: 1 }, Tuner::KFoldCv).is_err());
    }
}
