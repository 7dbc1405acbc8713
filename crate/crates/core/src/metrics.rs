//! Forecast accuracy: mean absolute percentage error and directional symmetry.

use alloc::string::String;
use alloc::vec::Vec;

use crate::error::{Error, Result};

/// Mean absolute percentage error, in percent.
pub fn mape(actual: &[f64], forecast: &[f64]) -> Result<f64> {
    check_lengths(actual, forecast, 1)?;
    let mut acc = 0.0;
    for (i, (y, f)) in actual.iter().zip(forecast).enumerate() {
        if *y == 0.0 {
            return Err(Error::ZeroActual { index: i });
        }
        acc += libm::fabs((f - y) / y);
    }
    Ok(100.0 * acc / actual.len() as f64)
}

/// Which differences the forecast side of the direction test uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "kebab-case"))]
pub enum DirectionBasis {
    /// `(ŷ_i − ŷ_{i−1})`: forecast against the previous forecast.
    #[default]
    ForecastChange,
    /// `(ŷ_i − y_{i−1})`: forecast against the previous actual.
    PreviousActual,
}

/// Directional symmetry in percent over `i = 2..n`, divided by `n − 1`.
///
/// A zero product (no change on either side) counts as a miss.
pub fn directional_symmetry(actual: &[f64], forecast: &[f64]) -> Result<f64> {
    directional_symmetry_with(actual, forecast, DirectionBasis::ForecastChange)
}

pub fn directional_symmetry_with(
    actual: &[f64],
    forecast: &[f64],
    basis: DirectionBasis,
) -> Result<f64> {
    check_lengths(actual, forecast, 2)?;
    let hits = (1..actual.len())
        .filter(|&i| {
            let da = actual[i] - actual[i - 1];
            let df = match basis {
                DirectionBasis::ForecastChange => forecast[i] - forecast[i - 1],
                DirectionBasis::PreviousActual => forecast[i] - actual[i - 1],
            };
            da * df > 0.0
        })
        .count();
    Ok(100.0 * hits as f64 / (actual.len() - 1) as f64)
}

fn check_lengths(actual: &[f64], forecast: &[f64], min: usize) -> Result<()> {
    if actual.len() != forecast.len() {
        return Err(Error::LengthMismatch {
            left: actual.len(),
            right: forecast.len(),
        });
    }
    if actual.len() < min {
        return Err(Error::InsufficientData {
            needed: min,
            available: actual.len(),
        });
    }
    Ok(())
}

/// Which evaluation window a report covers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "kebab-case"))]
pub enum Sample {
    InSample,
    OutOfSample,
}

impl Sample {
    pub fn label(self) -> &'static str {
        match self {
            Sample::InSample => "in",
            Sample::OutOfSample => "out",
        }
    }
}

/// Accuracy of one model at one horizon over one window.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct EvalReport {
    pub model: String,
    pub horizon: usize,
    pub sample: Sample,
    pub mape_pct: f64,
    pub ds_pct: f64,
    pub n_obs: usize,
    /// Index (year) of each forecast target.
    pub targets: Vec<i32>,
    pub forecast: Vec<f64>,
    pub actual: Vec<f64>,
}

impl EvalReport {
    pub fn new(
        model: impl Into<String>,
        horizon: usize,
        sample: Sample,
        targets: Vec<i32>,
        actual: Vec<f64>,
        forecast: Vec<f64>,
    ) -> Result<Self> {
        let mape_pct = mape(&actual, &forecast)?;
        let ds_pct = directional_symmetry(&actual, &forecast)?;
        Ok(Self {
            model: model.into(),
            horizon,
            sample,
            mape_pct,
            ds_pct,
            n_obs: actual.len(),
            targets,
            forecast,
            actual,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn mape_hand_cases() {
        assert_eq!(mape(&[100.0], &[110.0]).unwrap(), 10.0);
        assert_eq!(mape(&[3.0, 4.0], &[3.0, 4.0]).unwrap(), 0.0);
        assert_eq!(mape(&[100.0, 200.0], &[90.0, 220.0]).unwrap(), 10.0);
    }

    #[test]
    fn mape_errors() {
        assert_eq!(
            mape(&[1.0, 0.0], &[1.0, 1.0]),
            Err(Error::ZeroActual { index: 1 })
        );
        assert!(matches!(
            mape(&[1.0], &[1.0, 2.0]),
            Err(Error::LengthMismatch { .. })
        ));
    }

    #[test]
    fn ds_hand_cases() {
        assert_eq!(
            directional_symmetry(&[1.0, 2.0, 3.0], &[10.0, 11.0, 12.0]).unwrap(),
            100.0
        );
        assert_eq!(
            directional_symmetry(&[1.0, 2.0, 1.0], &[5.0, 4.0, 5.0]).unwrap(),
            0.0
        );
        assert_eq!(directional_symmetry(&[1.0, 2.0], &[5.0, 5.0]).unwrap(), 0.0);
        assert!(directional_symmetry(&[1.0], &[1.0]).is_err());
    }

    #[test]
    fn ds_previous_actual_basis() {
        // forecast flat at 5 but above the previous actual 1 -> counted as a rise
        let ds = directional_symmetry_with(&[1.0, 2.0], &[5.0, 5.0], DirectionBasis::PreviousActual)
            .unwrap();
        assert_eq!(ds, 100.0);
    }

    fn pair() -> impl Strategy<Value = (alloc::vec::Vec<f64>, alloc::vec::Vec<f64>)> {
        (2usize..30).prop_flat_map(|n| {
            (
                proptest::collection::vec(1.0f64..100.0, n),
                proptest::collection::vec(1.0f64..100.0, n),
            )
        })
    }

    proptest! {
        #[test]
        fn ds_bounded((a, f) in pair()) {
            let ds = directional_symmetry(&a, &f).unwrap();
            prop_assert!((0.0..=100.0).contains(&ds));
        }

        #[test]
        fn mape_scale_invariant((a, f) in pair(), c in 0.01f64..100.0) {
            let a2: alloc::vec::Vec<f64> = a.iter().map(|v| v * c).collect();
            let f2: alloc::vec::Vec<f64> = f.iter().map(|v| v * c).collect();
            let m1 = mape(&a, &f).unwrap();
            let m2 = mape(&a2, &f2).unwrap();
            prop_assert!((m1 - m2).abs() <= 1e-9 * m1.max(1.0));
        }

        #[test]
        fn ds_shift_and_scale_invariant((a, f) in pair(), k in -50.0f64..50.0, c in 0.5f64..4.0) {
            let ds = directional_symmetry(&a, &f).unwrap();
            let shift = |v: &alloc::vec::Vec<f64>| v.iter().map(|x| x + k).collect::<alloc::vec::Vec<_>>();
            let scale = |v: &alloc::vec::Vec<f64>| v.iter().map(|x| x * c).collect::<alloc::vec::Vec<_>>();
            prop_assert_eq!(directional_symmetry(&shift(&a), &shift(&f)).unwrap(), ds);
            prop_assert_eq!(directional_symmetry(&scale(&a), &scale(&f)).unwrap(), ds);
        }

        #[test]
        fn ds_self_is_full(steps in proptest::collection::vec(prop_oneof![0.1f64..5.0, -5.0f64..-0.1], 1..30)) {
            let mut a = alloc::vec![10.0];
            for s in steps { let l = *a.last().unwrap(); a.push(l + s); }
            prop_assert_eq!(directional_symmetry(&a, &a).unwrap(), 100.0);
        }
    }
}
