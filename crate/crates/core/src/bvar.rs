//! Vector autoregressions in levels under a Minnesota prior.
//!
//! Each equation is estimated on its own by mixed estimation: the prior on
//! every lag coefficient enters as one pseudo-observation, the constant is left
//! unrestricted, and the posterior mean follows from a single generalized
//! least-squares solve.

use alloc::string::String;
use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector};

use crate::error::{invalid, Error, Result};
use crate::series::Dataset;

/// Overall tightness, lag decay and cross-variable weight.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct PriorSpec {
    pub tightness: f64,
    pub decay: f64,
    pub cross_weight: f64,
}

impl PriorSpec {
    pub fn new(tightness: f64, decay: f64, cross_weight: f64) -> Self {
        Self {
            tightness,
            decay,
            cross_weight,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.tightness > 0.0) || !self.tightness.is_finite() {
            return Err(invalid!("prior tightness must be positive"));
        }
        if !(self.decay > 0.0) || !self.decay.is_finite() {
            return Err(invalid!("prior lag decay must be positive"));
        }
        if !(self.cross_weight > 0.0 && self.cross_weight <= 1.0) {
            return Err(invalid!("cross-variable weight must lie in (0, 1]"));
        }
        Ok(())
    }
}

/// The ten `(tightness, decay) × cross_weight` combinations searched by default.
pub fn default_prior_grid() -> Vec<PriorSpec> {
    let pairs = [(0.3, 0.5), (0.2, 1.0), (0.1, 1.0), (0.2, 2.0), (0.1, 2.0)];
    let mut out = Vec::with_capacity(10);
    for k in [0.5, 0.001] {
        for (q, d) in pairs {
            out.push(PriorSpec::new(q, d, k));
        }
    }
    out
}

/// Hyperparameters plus the per-variable residual scales `σ̂`.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct MinnesotaPrior {
    pub spec: PriorSpec,
    pub scales: Vec<f64>,
}

impl MinnesotaPrior {
    pub fn new(spec: PriorSpec, scales: Vec<f64>) -> Result<Self> {
        spec.validate()?;
        if scales.iter().any(|s| !(*s > 0.0) || !s.is_finite()) {
            return Err(invalid!("prior scales must be positive and finite"));
        }
        Ok(Self { spec, scales })
    }

    /// Scales from univariate AR(`lag_order`) residuals of every series in `ds`.
    pub fn estimate(spec: PriorSpec, ds: &Dataset, lag_order: usize) -> Result<Self> {
        let scales = ds
            .series()
            .iter()
            .map(|s| ar_residual_sd(s.values(), lag_order))
            .collect::<Result<Vec<_>>>()?;
        Self::new(spec, scales)
    }

    /// `q · m^(−d) · f(i, j) · σ̂_i / σ̂_j`, 1-based lag `m`.
    pub fn prior_sd(&self, equation: usize, variable: usize, lag: usize) -> f64 {
        let g = libm::pow(lag as f64, -self.spec.decay);
        let f = if equation == variable {
            1.0
        } else {
            self.spec.cross_weight
        };
        self.spec.tightness * g * f * self.scales[equation] / self.scales[variable]
    }

    /// 1 on the own first lag, 0 elsewhere.
    pub fn prior_mean(&self, equation: usize, variable: usize, lag: usize) -> f64 {
        if equation == variable && lag == 1 {
            1.0
        } else {
            0.0
        }
    }
}

/// Regressors `[1, y_{t−1}, …, y_{t−p}]` (variables inner) for rows `first..T`.
fn design(data: &[&[f64]], lag_order: usize, first: usize) -> DMatrix<f64> {
    let t_len = data[0].len();
    let k = data.len();
    let rows = t_len - first;
    DMatrix::from_fn(rows, 1 + k * lag_order, |r, c| {
        if c == 0 {
            return 1.0;
        }
        let m = (c - 1) / k + 1;
        let j = (c - 1) % k;
        data[j][first + r - m]
    })
}

fn solve_spd(a: DMatrix<f64>, b: DVector<f64>, what: &str) -> Result<DVector<f64>> {
    let chol = a
        .cholesky()
        .ok_or_else(|| Error::Singular(String::from(what)))?;
    Ok(chol.solve(&b))
}

fn ols(x: &DMatrix<f64>, y: &DVector<f64>) -> Result<DVector<f64>> {
    solve_spd(x.transpose() * x, x.transpose() * y, "least-squares normal equations")
}

/// Residual sd (divisor `T − p − 1`) of an AR(p) with constant fitted by OLS.
pub fn ar_residual_sd(y: &[f64], lag_order: usize) -> Result<f64> {
    let k = lag_order + 1;
    let rows = y.len().saturating_sub(lag_order);
    if lag_order == 0 || rows <= k {
        return Err(Error::InsufficientData {
            needed: lag_order + k + 1,
            available: y.len(),
        });
    }
    let x = design(&[y], lag_order, lag_order);
    let target = DVector::from_column_slice(&y[lag_order..]);
    let beta = ols(&x, &target)?;
    let resid = &target - &x * &beta;
    let sd = libm::sqrt(resid.dot(&resid) / (rows - k) as f64);
    if sd > 0.0 {
        Ok(sd)
    } else {
        Err(Error::Singular(String::from("autoregression fits exactly")))
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct BvarModel {
    pub variables: Vec<String>,
    pub lag_order: usize,
    pub intercepts: Vec<f64>,
    /// `lag_matrices[m − 1][i][j]`: weight of variable `j` at lag `m` in equation `i`.
    pub lag_matrices: Vec<Vec<Vec<f64>>>,
    pub residual_sd: Vec<f64>,
    pub prior: Option<MinnesotaPrior>,
}

impl BvarModel {
    pub fn n_vars(&self) -> usize {
        self.variables.len()
    }

    /// Iterated forecasts for `1..=horizon` from the last `lag_order` rows of
    /// `recent` (one slice per variable, model order). `path[h − 1][i]`.
    pub fn forecast_from(&self, recent: &[&[f64]], horizon: usize) -> Result<Vec<Vec<f64>>> {
        let k = self.n_vars();
        if recent.len() != k {
            return Err(Error::DimensionMismatch {
                expected: k,
                found: recent.len(),
            });
        }
        let len = recent[0].len();
        if recent.iter().any(|s| s.len() != len) || len < self.lag_order {
            return Err(Error::InsufficientData {
                needed: self.lag_order,
                available: recent.iter().map(|s| s.len()).min().unwrap_or(0),
            });
        }
        // lagged state, most recent first
        let mut state: Vec<Vec<f64>> = (1..=self.lag_order)
            .map(|m| recent.iter().map(|s| s[len - m]).collect())
            .collect();
        let mut path = Vec::with_capacity(horizon);
        for _ in 0..horizon {
            let next: Vec<f64> = (0..k)
                .map(|i| {
                    let mut v = self.intercepts[i];
                    for (m, lagged) in state.iter().enumerate() {
                        let row = &self.lag_matrices[m][i];
                        for j in 0..k {
                            v += row[j] * lagged[j];
                        }
                    }
                    v
                })
                .collect();
            if !state.is_empty() {
                state.pop();
                state.insert(0, next.clone());
            }
            path.push(next);
        }
        Ok(path)
    }

    /// Forecasts from the end of `history`, matched to the model's variables by name.
    pub fn forecast(&self, history: &Dataset, horizon: usize) -> Result<Vec<Vec<f64>>> {
        let recent = self
            .variables
            .iter()
            .map(|v| history.require(v).map(|s| s.values()))
            .collect::<Result<Vec<_>>>()?;
        self.forecast_from(&recent, horizon)
    }

    /// One-step fitted values of equation `equation` for rows `lag_order..T`.
    pub fn fitted(&self, data: &[&[f64]], equation: usize) -> Vec<f64> {
        let k = self.n_vars();
        let t_len = data[0].len();
        (self.lag_order..t_len)
            .map(|t| {
                let mut v = self.intercepts[equation];
                for m in 1..=self.lag_order {
                    let row = &self.lag_matrices[m - 1][equation];
                    for j in 0..k {
                        v += row[j] * data[j][t - m];
                    }
                }
                v
            })
            .collect()
    }
}

fn columns(ds: &Dataset) -> Vec<&[f64]> {
    ds.series().iter().map(|s| s.values()).collect()
}

fn names(ds: &Dataset) -> Vec<String> {
    ds.names().map(String::from).collect()
}

fn check_length(t_len: usize, lag_order: usize) -> Result<()> {
    if lag_order == 0 {
        return Err(invalid!("lag order must be at least 1"));
    }
    if t_len < lag_order + 2 {
        return Err(Error::InsufficientData {
            needed: lag_order + 2,
            available: t_len,
        });
    }
    Ok(())
}

fn assemble(
    ds: &Dataset,
    lag_order: usize,
    coefs: Vec<DVector<f64>>,
    residual_sd: Vec<f64>,
    prior: Option<MinnesotaPrior>,
) -> BvarModel {
    let k = coefs.len();
    let intercepts = coefs.iter().map(|c| c[0]).collect();
    let lag_matrices = (1..=lag_order)
        .map(|m| {
            (0..k)
                .map(|i| (0..k).map(|j| coefs[i][1 + (m - 1) * k + j]).collect())
                .collect()
        })
        .collect();
    BvarModel {
        variables: names(ds),
        lag_order,
        intercepts,
        lag_matrices,
        residual_sd,
        prior,
    }
}

fn residual_sd(x: &DMatrix<f64>, y: &DVector<f64>, beta: &DVector<f64>) -> f64 {
    let r = y - x * beta;
    libm::sqrt(r.dot(&r) / y.len() as f64)
}

/// Posterior-mean VAR(`lag_order`) under `prior` (one scale per series of `ds`).
pub fn fit(ds: &Dataset, lag_order: usize, prior: &MinnesotaPrior) -> Result<BvarModel> {
    let data = columns(ds);
    let k = data.len();
    check_length(data[0].len(), lag_order)?;
    if prior.scales.len() != k {
        return Err(Error::DimensionMismatch {
            expected: k,
            found: prior.scales.len(),
        });
    }
    let x = design(&data, lag_order, lag_order);
    let xtx = x.transpose() * &x;
    let n_coef = x.ncols();
    let solved = crate::par::try_map(&(0..k).collect::<Vec<_>>(), |&i| -> Result<(DVector<f64>, f64)> {
        let y = DVector::from_column_slice(&data[i][lag_order..]);
        let w = 1.0 / (prior.scales[i] * prior.scales[i]);
        let mut a = &xtx * w;
        let mut b = x.transpose() * &y * w;
        for c in 1..n_coef {
            let m = (c - 1) / k + 1;
            let j = (c - 1) % k;
            let sd = prior.prior_sd(i, j, m);
            let precision = 1.0 / (sd * sd);
            a[(c, c)] += precision;
            b[c] += precision * prior.prior_mean(i, j, m);
        }
        let beta = solve_spd(a, b, "mixed-estimation system")?;
        let sd = residual_sd(&x, &y, &beta);
        Ok((beta, sd))
    })?;
    let (coefs, sds) = solved.into_iter().unzip();
    Ok(assemble(ds, lag_order, coefs, sds, Some(prior.clone())))
}

/// Estimates `σ̂` from univariate autoregressions of the same order, then fits.
pub fn fit_with_spec(ds: &Dataset, lag_order: usize, spec: PriorSpec) -> Result<BvarModel> {
    let prior = MinnesotaPrior::estimate(spec, ds, lag_order)?;
    fit(ds, lag_order, &prior)
}

/// Unrestricted VAR by equation-wise OLS.
pub fn fit_ols(ds: &Dataset, lag_order: usize) -> Result<BvarModel> {
    let data = columns(ds);
    check_length(data[0].len(), lag_order)?;
    fit_ols_from(ds, &data, lag_order, lag_order)
}

fn fit_ols_from(ds: &Dataset, data: &[&[f64]], lag_order: usize, first: usize) -> Result<BvarModel> {
    let x = design(data, lag_order, first);
    if x.nrows() <= x.ncols() {
        return Err(Error::InsufficientData {
            needed: first + x.ncols() + 1,
            available: data[0].len(),
        });
    }
    let mut coefs = Vec::with_capacity(data.len());
    let mut sds = Vec::with_capacity(data.len());
    for s in data {
        let y = DVector::from_column_slice(&s[first..]);
        let beta = ols(&x, &y)?;
        sds.push(residual_sd(&x, &y, &beta));
        coefs.push(beta);
    }
    Ok(assemble(ds, lag_order, coefs, sds, None))
}

/// `ln det Σ̂ + (ln T / T) · #parameters` for each order `1..=max_lag`, all
/// estimated on the rows after the first `max_lag`.
pub fn sic_scores(ds: &Dataset, max_lag: usize) -> Result<Vec<(usize, f64)>> {
    if max_lag == 0 {
        return Err(invalid!("maximum lag must be at least 1"));
    }
    let data = columns(ds);
    let k = data.len();
    let mut out = Vec::with_capacity(max_lag);
    for p in 1..=max_lag {
        let x = design(&data, p, max_lag);
        let t = x.nrows();
        if t <= x.ncols() {
            return Err(Error::InsufficientData {
                needed: max_lag + 1 + k * max_lag + 1,
                available: data[0].len(),
            });
        }
        let mut resid = DMatrix::zeros(t, k);
        for (i, s) in data.iter().enumerate() {
            let y = DVector::from_column_slice(&s[max_lag..]);
            let beta = ols(&x, &y)?;
            resid.set_column(i, &(&y - &x * &beta));
        }
        let sigma = resid.transpose() * &resid / t as f64;
        let chol = sigma
            .cholesky()
            .ok_or_else(|| Error::Singular(String::from("residual covariance")))?;
        let log_det: f64 = chol.l().diagonal().iter().map(|d| 2.0 * libm::log(*d)).sum();
        let params = (k * (k * p + 1)) as f64;
        let tf = t as f64;
        out.push((p, log_det + libm::log(tf) / tf * params));
    }
    Ok(out)
}

/// Order minimizing the Schwarz criterion; ties go to the smaller order.
pub fn select_lag_sic(ds: &Dataset, max_lag: usize) -> Result<usize> {
    let scores = sic_scores(ds, max_lag)?;
    let mut best = scores[0];
    for &s in &scores[1..] {
        if s.1 < best.1 {
            best = s;
        }
    }
    Ok(best.0)
}

#[derive(Debug, Clone, PartialEq)]
pub struct PriorSearch {
    pub best: PriorSpec,
    pub best_score: f64,
    /// In-sample one-step MAPE of the target equation per grid entry.
    pub table: Vec<(PriorSpec, f64)>,
}

/// Grid search over prior hyperparameters scored by in-sample one-step MAPE
/// of the target equation; ties go to the earlier grid entry.
pub fn tune_prior(ds: &Dataset, lag_order: usize, grid: &[PriorSpec]) -> Result<PriorSearch> {
    if grid.is_empty() {
        return Err(Error::EmptyGrid);
    }
    let target = ds.index_of(ds.target_name()).unwrap_or(0);
    let data = columns(ds);
    let scores = crate::par::try_map(grid, |spec| -> Result<f64> {
        let model = fit_with_spec(ds, lag_order, *spec)?;
        let fitted = model.fitted(&data, target);
        crate::metrics::mape(&data[target][lag_order..], &fitted)
    })?;
    let table: Vec<(PriorSpec, f64)> = grid.iter().copied().zip(scores).collect();
    let mut best = 0;
    for i in 1..table.len() {
        if table[i].1 < table[best].1 {
            best = i;
        }
    }
    Ok(PriorSearch {
        best: table[best].0,
        best_score: table[best].1,
        table,
    })
}
