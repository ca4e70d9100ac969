//! Stationarizing transformations keyed by the McCracken-Ng codes 1..7.

use nalgebra::DMatrix;

use crate::data::panel::RawPanel;
use crate::error::{Error, Result};

/// Apply transformation `code` to `series`. Entries without enough history,
/// or computed from a missing input, are NaN.
///
/// | code | transform            |
/// |------|----------------------|
/// | 1    | x                    |
/// | 2    | Δx                   |
/// | 3    | Δ²x                  |
/// | 4    | ln x                 |
/// | 5    | Δ ln x               |
/// | 6    | Δ² ln x              |
/// | 7    | Δ(x_t / x_{t-1} − 1) |
pub fn apply_tcode(series: &[f64], code: u8) -> Result<Vec<f64>> {
    if !(1..=7).contains(&code) {
        return Err(Error::Argument(format!("transformation code {code} outside 1..7")));
    }
    let logged = if (4..=6).contains(&code) {
        let mut out = Vec::with_capacity(series.len());
        for (i, &v) in series.iter().enumerate() {
            if v.is_finite() && v <= 0.0 {
                return Err(Error::Domain {
                    index: i,
                    message: format!("log transform of non-positive value {v}"),
                });
            }
            out.push(v.ln());
        }
        out
    } else {
        series.to_vec()
    };
    Ok(match code {
        1 | 4 => logged,
        2 | 5 => diff(&logged),
        3 | 6 => diff(&diff(&logged)),
        7 => {
            let mut growth = vec![f64::NAN; series.len()];
            for i in 1..series.len() {
                growth[i] = series[i] / series[i - 1] - 1.0;
            }
            diff(&growth)
        }
        _ => unreachable!(),
    })
}

fn diff(x: &[f64]) -> Vec<f64> {
    let mut out = vec![f64::NAN; x.len()];
    for i in 1..x.len() {
        out[i] = x[i] - x[i - 1];
    }
    out
}

/// Transform every column of the panel by its own code.
pub fn stationarize(panel: &RawPanel) -> Result<DMatrix<f64>> {
    let mut out = DMatrix::from_element(panel.n_periods(), panel.n_series(), f64::NAN);
    for j in 0..panel.n_series() {
        let col: Vec<f64> = panel.values.column(j).iter().copied().collect();
        let t = apply_tcode(&col, panel.tcodes[j]).map_err(|e| match e {
            Error::Domain { index, message } => Error::Domain {
                index,
                message: format!("{message} in series {}", panel.names[j]),
            },
            other => other,
        })?;
        out.set_column(j, &nalgebra::DVector::from_vec(t));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::E;

    fn same(a: &[f64], b: &[f64]) -> bool {
        a.len() == b.len()
            && a.iter().zip(b).all(|(x, y)| (x.is_nan() && y.is_nan()) || (x - y).abs() < 1e-12)
    }

    #[test]
    fn identity_code() {
        assert!(same(&apply_tcode(&[3., 1., 4.], 1).unwrap(), &[3., 1., 4.]));
    }

    #[test]
    fn log_difference_of_exponentials() {
        let out = apply_tcode(&[1.0, E, E * E], 5).unwrap();
        assert!(same(&out, &[f64::NAN, 1.0, 1.0]));
    }

    #[test]
    fn first_difference() {
        assert!(same(&apply_tcode(&[5., 7., 10.], 2).unwrap(), &[f64::NAN, 2., 3.]));
    }

    #[test]
    fn second_differences_and_growth_change() {
        assert!(same(&apply_tcode(&[1., 2., 4., 8.], 3).unwrap(), &[f64::NAN, f64::NAN, 1., 2.]));
        let out = apply_tcode(&[1., 2., 4., 12.], 7).unwrap();
        assert!(same(&out, &[f64::NAN, f64::NAN, 0., 1.]));
        let out = apply_tcode(&[1., E, E.powi(3)], 6).unwrap();
        assert!(same(&out, &[f64::NAN, f64::NAN, 1.]));
        assert!(same(&apply_tcode(&[1., E], 4).unwrap(), &[0., 1.]));
    }

    #[test]
    fn non_positive_log_input_names_index() {
        match apply_tcode(&[1., 2., 0., 3.], 5) {
            Err(Error::Domain { index, .. }) => assert_eq!(index, 2),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn missing_input_propagates() {
        let out = apply_tcode(&[f64::NAN, 2., 3., 5.], 2).unwrap();
        assert!(same(&out, &[f64::NAN, f64::NAN, 1., 2.]));
    }

    #[test]
    fn bad_code_rejected() {
        assert!(apply_tcode(&[1.], 0).is_err());
        assert!(apply_tcode(&[1.], 8).is_err());
    }

    proptest::proptest! {
        #[test]
        fn difference_then_cumsum_restores(xs in proptest::collection::vec(-1e3f64..1e3, 2..60)) {
            let d = apply_tcode(&xs, 2).unwrap();
            let mut acc = xs[0];
            for i in 1..xs.len() {
                acc += d[i];
                proptest::prop_assert!((acc - xs[i]).abs() < 1e-10);
            }
        }
    }
}
