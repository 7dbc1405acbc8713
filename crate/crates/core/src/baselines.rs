//! Random-walk benchmarks.

use alloc::vec::Vec;

use crate::error::{Error, Result};

/// Random walk, optionally with a constant drift.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct RwModel {
    pub drift: f64,
}

impl RwModel {
    pub fn pure() -> Self {
        Self { drift: 0.0 }
    }

    /// Drift = mean first difference of `history` (0 when `with_drift` is false).
    pub fn fit(history: &[f64], with_drift: bool) -> Result<Self> {
        if history.len() < 2 {
            return Err(Error::InsufficientData {
                needed: 2,
                available: history.len(),
            });
        }
        if !with_drift {
            return Ok(Self::pure());
        }
        let n = history.len();
        // mean of differences telescopes
        let drift = (history[n - 1] - history[0]) / (n - 1) as f64;
        Ok(Self { drift })
    }

    /// `last + h * drift`.
    pub fn forecast_from(&self, last: f64, horizon: usize) -> f64 {
        last + horizon as f64 * self.drift
    }
}

/// `ŷ_{t+h} = y_t + h·drift` for `h = 1..=horizon`.
pub fn rw_forecast(history: &[f64], horizon: usize, with_drift: bool) -> Result<Vec<f64>> {
    let model = RwModel::fit(history, with_drift)?;
    let last = history[history.len() - 1];
    Ok((1..=horizon).map(|h| model.forecast_from(last, h)).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metrics::mape;

    #[test]
    fn hand_cases() {
        assert_eq!(rw_forecast(&[1.0, 2.0, 3.0], 5, false).unwrap()[4], 3.0);
        assert_eq!(rw_forecast(&[1.0, 2.0, 3.0], 2, true).unwrap()[1], 5.0);
        for h in rw_forecast(&[4.0, 4.0, 4.0], 7, true).unwrap() {
            assert_eq!(h, 4.0);
        }
        assert!(rw_forecast(&[1.0], 1, true).is_err());
        assert_eq!(RwModel::fit(&[1.0, 9.0], false).unwrap().drift, 0.0);
    }

    #[test]
    fn one_step_mape_equals_naive() {
        let y = [100.0, 103.0, 101.0, 106.0, 110.0, 108.0];
        let fc: Vec<f64> = (1..y.len())
            .map(|t| rw_forecast(&y[..t.max(2)], 1, false).unwrap()[0])
            .collect();
        let naive: Vec<f64> = y[..y.len() - 1].to_vec();
        // the first origin needs two points, so compare from t = 2
        assert_eq!(
            mape(&y[2..], &fc[1..]).unwrap(),
            mape(&y[2..], &naive[1..]).unwrap()
        );
    }

    #[test]
    fn drift_exact_on_linear_data() {
        let y: Vec<f64> = (0..20).map(|i| 5.0 + 0.25 * i as f64).collect();
        let path = rw_forecast(&y[..10], 10, true).unwrap();
        for (h, f) in path.iter().enumerate() {
            assert!((f - y[10 + h]).abs() < 1e-12);
        }
    }
}
