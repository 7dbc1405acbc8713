//! Natural cubic spline interpolation.

use alloc::vec::Vec;

use crate::error::{invalid, Result};

/// Natural cubic spline (zero second derivative at both ends).
#[derive(Debug, Clone)]
pub struct NaturalCubicSpline {
    xs: Vec<f64>,
    ys: Vec<f64>,
    /// Second derivatives at the knots.
    m: Vec<f64>,
}

impl NaturalCubicSpline {
    pub fn new(xs: &[f64], ys: &[f64]) -> Result<Self> {
        let n = xs.len();
        if n < 2 || ys.len() != n {
            return Err(invalid!("spline needs at least 2 knots with matching values"));
        }
        if xs.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(invalid!("spline knots must be strictly increasing"));
        }
        let mut m = alloc::vec![0.0; n];
        if n > 2 {
            // Thomas algorithm on the interior second derivatives.
            let k = n - 2;
            let mut diag = Vec::with_capacity(k);
            let mut rhs = Vec::with_capacity(k);
            let mut upper = Vec::with_capacity(k);
            for i in 1..n - 1 {
                let h0 = xs[i] - xs[i - 1];
                let h1 = xs[i + 1] - xs[i];
                diag.push(2.0 * (h0 + h1));
                upper.push(h1);
                rhs.push(6.0 * ((ys[i + 1] - ys[i]) / h1 - (ys[i] - ys[i - 1]) / h0));
            }
            for i in 1..k {
                let lower = xs[i + 1] - xs[i];
                let w = lower / diag[i - 1];
                diag[i] -= w * upper[i - 1];
                rhs[i] -= w * rhs[i - 1];
            }
            m[k] = rhs[k - 1] / diag[k - 1];
            for i in (0..k - 1).rev() {
                m[i + 1] = (rhs[i] - upper[i] * m[i + 2]) / diag[i];
            }
        }
        Ok(Self {
            xs: xs.to_vec(),
            ys: ys.to_vec(),
            m,
        })
    }

    fn segment(&self, x: f64) -> usize {
        let n = self.xs.len();
        let idx = self.xs.partition_point(|&k| k <= x);
        idx.clamp(1, n - 1) - 1
    }

    /// Evaluate at `x`; outside the knots the end cubic is extended.
    pub fn eval(&self, x: f64) -> f64 {
        let i = self.segment(x);
        let h = self.xs[i + 1] - self.xs[i];
        let a = (self.xs[i + 1] - x) / h;
        let b = (x - self.xs[i]) / h;
        a * self.ys[i]
            + b * self.ys[i + 1]
            + ((a * a * a - a) * self.m[i] + (b * b * b - b) * self.m[i + 1]) * h * h / 6.0
    }
}
