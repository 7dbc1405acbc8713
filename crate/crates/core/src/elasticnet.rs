//! Elastic-net linear regression by cyclic coordinate descent, used as a
//! variable filter ahead of the support vector models.
//!
//! The objective is
//! `½n⁻¹‖y − b − Xβ‖² + λ[α‖β‖₁ + ½(1 − α)‖β‖²]`
//! with an unpenalized intercept `b`. `α = 1` is the lasso and `α = 0` ridge.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{invalid, Result};
use crate::series::{Column, LagMatrix};
use crate::stats;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitOptions {
    /// Converged once no coefficient moves by more than this in a sweep.
    pub tol: f64,
    pub max_sweeps: usize,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self {
            tol: 1e-7,
            max_sweeps: 100_000,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ElasticNetModel {
    pub columns: Vec<Column>,
    pub coefficients: Vec<f64>,
    pub intercept: f64,
    pub lambda: f64,
    pub alpha: f64,
    pub sweeps: usize,
    pub converged: bool,
}

impl ElasticNetModel {
    pub fn predict(&self, row: &[f64]) -> f64 {
        self.intercept + stats::dot(&self.coefficients, row)
    }

    /// Indices of the nonzero coefficients.
    pub fn support(&self) -> Vec<usize> {
        (0..self.coefficients.len())
            .filter(|&j| self.coefficients[j] != 0.0)
            .collect()
    }
}

/// Column-centred copy of the design with the column scale terms `n⁻¹‖x_j‖²`.
struct Centered {
    n: usize,
    p: usize,
    /// Column-major.
    cols: Vec<f64>,
    y: Vec<f64>,
    x_means: Vec<f64>,
    y_mean: f64,
    scale: Vec<f64>,
    /// `n⁻¹ x_jᵀ x_k`, row-major.
    gram: Vec<f64>,
    /// `n⁻¹ x_jᵀ y`.
    xty: Vec<f64>,
}

impl Centered {
    fn new(data: &LagMatrix) -> Self {
        let n = data.n_rows();
        let p = data.n_cols();
        let mut cols = Vec::with_capacity(n * p);
        let mut x_means = Vec::with_capacity(p);
        let mut scale = Vec::with_capacity(p);
        for j in 0..p {
            let c = data.column(j);
            let m = stats::mean(&c);
            let centred: Vec<f64> = c.iter().map(|v| v - m).collect();
            scale.push(stats::dot(&centred, &centred) / n as f64);
            cols.extend(centred);
            x_means.push(m);
        }
        let y_mean = stats::mean(data.target());
        let y: Vec<f64> = data.target().iter().map(|v| v - y_mean).collect();
        let col = |j: usize| &cols[j * n..(j + 1) * n];
        let mut gram = vec![0.0; p * p];
        for j in 0..p {
            for k in j..p {
                let g = stats::dot(col(j), col(k)) / n as f64;
                gram[j * p + k] = g;
                gram[k * p + j] = g;
            }
        }
        let xty = (0..p).map(|j| stats::dot(col(j), &y) / n as f64).collect();
        Self {
            n,
            p,
            cols,
            y,
            x_means,
            y_mean,
            scale,
            gram,
            xty,
        }
    }

    /// `n⁻¹ Xᵀ(y − Xβ)`.
    fn gradient(&self, beta: &[f64]) -> Vec<f64> {
        let mut g = self.xty.clone();
        for (k, b) in beta.iter().enumerate() {
            if *b != 0.0 {
                for (gj, x) in g.iter_mut().zip(&self.gram[k * self.p..(k + 1) * self.p]) {
                    *gj -= b * x;
                }
            }
        }
        g
    }

    fn col(&self, j: usize) -> &[f64] {
        &self.cols[j * self.n..(j + 1) * self.n]
    }

    fn residual(&self, beta: &[f64]) -> Vec<f64> {
        let mut r = self.y.clone();
        for (j, b) in beta.iter().enumerate() {
            if *b != 0.0 {
                for (ri, x) in r.iter_mut().zip(self.col(j)) {
                    *ri -= b * x;
                }
            }
        }
        r
    }

    fn objective(&self, beta: &[f64], lambda: f64, alpha: f64) -> f64 {
        let r = self.residual(beta);
        let l1: f64 = beta.iter().map(|b| libm::fabs(*b)).sum();
        let l2 = stats::dot(beta, beta);
        0.5 * stats::dot(&r, &r) / self.n as f64 + lambda * (alpha * l1 + 0.5 * (1.0 - alpha) * l2)
    }
}

/// `S(z, λα) / (scale + λ(1 − α))`; the threshold test is written as
/// `|z|/α ≤ λ` so that `λ = lambda_max` zeroes exactly.
fn shrink(z: f64, scale: f64, lambda: f64, alpha: f64) -> f64 {
    let denom = scale + lambda * (1.0 - alpha);
    if denom <= 0.0 {
        return 0.0;
    }
    if alpha > 0.0 && libm::fabs(z) / alpha <= lambda {
        return 0.0;
    }
    let t = lambda * alpha;
    let s = if z > 0.0 { z - t } else { z + t };
    s / denom
}

fn check(lambda: f64, alpha: f64) -> Result<()> {
    if !(lambda >= 0.0) || !lambda.is_finite() {
        return Err(invalid!("lambda must be finite and non-negative"));
    }
    if !(0.0..=1.0).contains(&alpha) {
        return Err(invalid!("alpha must lie in [0, 1]"));
    }
    Ok(())
}

/// Smallest `λ` at which every coefficient is zero: `max_j |n⁻¹x_jᵀ(y − ȳ)| / α`.
pub fn lambda_max(data: &LagMatrix, alpha: f64) -> Result<f64> {
    if !(alpha > 0.0 && alpha <= 1.0) {
        return Err(invalid!("the null-model threshold needs alpha in (0, 1]"));
    }
    Ok(lambda_max_centered(&Centered::new(data), alpha))
}

fn lambda_max_centered(c: &Centered, alpha: f64) -> f64 {
    (0..c.p)
        .map(|j| libm::fabs(c.xty[j]))
        .fold(0.0, f64::max)
        / alpha
}

pub fn fit(data: &LagMatrix, lambda: f64, alpha: f64) -> Result<ElasticNetModel> {
    fit_with(data, lambda, alpha, &FitOptions::default(), None)
}

/// Coordinate descent from `warm` (or zero) coefficients.
pub fn fit_with(
    data: &LagMatrix,
    lambda: f64,
    alpha: f64,
    opts: &FitOptions,
    warm: Option<&[f64]>,
) -> Result<ElasticNetModel> {
    fit_traced(data, lambda, alpha, opts, warm, None)
}

/// As [`fit_with`], pushing the objective value after every sweep onto `trace`.
pub fn fit_traced(
    data: &LagMatrix,
    lambda: f64,
    alpha: f64,
    opts: &FitOptions,
    warm: Option<&[f64]>,
    trace: Option<&mut Vec<f64>>,
) -> Result<ElasticNetModel> {
    check(lambda, alpha)?;
    if data.n_rows() < 2 {
        return Err(crate::Error::InsufficientData {
            needed: 2,
            available: data.n_rows(),
        });
    }
    let c = Centered::new(data);
    let start = match warm {
        Some(w) if w.len() != c.p => {
            return Err(crate::Error::DimensionMismatch {
                expected: c.p,
                found: w.len(),
            })
        }
        Some(w) => w.to_vec(),
        None => vec![0.0; c.p],
    };
    let (beta, sweeps, converged) = descend(&c, start, lambda, alpha, opts, trace);
    Ok(finish(&c, data, beta, lambda, alpha, sweeps, converged))
}

fn finish(
    c: &Centered,
    data: &LagMatrix,
    beta: Vec<f64>,
    lambda: f64,
    alpha: f64,
    sweeps: usize,
    converged: bool,
) -> ElasticNetModel {
    let intercept = c.y_mean - stats::dot(&c.x_means, &beta);
    ElasticNetModel {
        columns: data.columns().to_vec(),
        coefficients: beta,
        intercept,
        lambda,
        alpha,
        sweeps,
        converged,
    }
}

fn descend(
    c: &Centered,
    mut beta: Vec<f64>,
    lambda: f64,
    alpha: f64,
    opts: &FitOptions,
    mut trace: Option<&mut Vec<f64>>,
) -> (Vec<f64>, usize, bool) {
    let p = c.p;
    let mut grad = c.gradient(&beta);
    for sweep in 1..=opts.max_sweeps {
        let mut max_change = 0.0f64;
        for j in 0..p {
            let old = beta[j];
            let z = grad[j] + c.scale[j] * old;
            let new = shrink(z, c.scale[j], lambda, alpha);
            if new != old {
                let d = new - old;
                for (gk, x) in grad.iter_mut().zip(&c.gram[j * p..(j + 1) * p]) {
                    *gk -= d * x;
                }
                beta[j] = new;
                max_change = max_change.max(libm::fabs(d));
            }
        }
        if let Some(t) = trace.as_deref_mut() {
            t.push(c.objective(&beta, lambda, alpha));
        }
        if max_change < opts.tol {
            return (beta, sweep, true);
        }
    }
    (beta, opts.max_sweeps, false)
}

/// Penalized objective of `model` on `data`.
pub fn objective(data: &LagMatrix, model: &ElasticNetModel) -> f64 {
    let n = data.n_rows() as f64;
    let mut loss = 0.0;
    for (row, y) in data.rows().zip(data.target()) {
        let e = y - model.predict(row);
        loss += e * e;
    }
    let b = &model.coefficients;
    let l1: f64 = b.iter().map(|v| libm::fabs(*v)).sum();
    0.5 * loss / n + model.lambda * (model.alpha * l1 + 0.5 * (1.0 - model.alpha) * stats::dot(b, b))
}

/// Largest KKT violation: for `β_j ≠ 0`, `|n⁻¹x_jᵀr − λα·sign β_j − λ(1 − α)β_j|`;
/// for `β_j = 0`, `max(|n⁻¹x_jᵀr| − λα, 0)`.
pub fn kkt_violation(data: &LagMatrix, model: &ElasticNetModel) -> f64 {
    let n = data.n_rows() as f64;
    let resid: Vec<f64> = data
        .rows()
        .zip(data.target())
        .map(|(row, y)| y - model.predict(row))
        .collect();
    let (lambda, alpha) = (model.lambda, model.alpha);
    let mut worst = 0.0f64;
    for (j, b) in model.coefficients.iter().enumerate() {
        let g = stats::dot(&data.column(j), &resid) / n;
        let v = if *b != 0.0 {
            libm::fabs(g - lambda * alpha * b.signum() - lambda * (1.0 - alpha) * b)
        } else {
            (libm::fabs(g) - lambda * alpha).max(0.0)
        };
        worst = worst.max(v);
    }
    worst
}

/// `len` log-spaced values from `max` down to `ratio · max`.
pub fn lambda_path(max: f64, ratio: f64, len: usize) -> Vec<f64> {
    if len <= 1 || max <= 0.0 {
        return vec![max; len.max(1)];
    }
    let lo = libm::log(ratio);
    (0..len)
        .map(|i| max * libm::exp(lo * i as f64 / (len - 1) as f64))
        .collect()
}

/// Warm-started fits along a decreasing path.
pub fn fit_path(
    data: &LagMatrix,
    lambdas: &[f64],
    alpha: f64,
    opts: &FitOptions,
) -> Result<Vec<ElasticNetModel>> {
    if data.n_rows() < 2 {
        return Err(crate::Error::InsufficientData {
            needed: 2,
            available: data.n_rows(),
        });
    }
    let c = Centered::new(data);
    let mut out: Vec<ElasticNetModel> = Vec::with_capacity(lambdas.len());
    for &l in lambdas {
        check(l, alpha)?;
        let start = out.last().map_or_else(|| vec![0.0; c.p], |m| m.coefficients.clone());
        let (beta, sweeps, converged) = descend(&c, start, l, alpha, opts, None);
        out.push(finish(&c, data, beta, l, alpha, sweeps, converged));
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SelectionConfig {
    pub alpha: f64,
    pub path_len: usize,
    /// Smallest path value as a fraction of `lambda_max`.
    pub min_ratio: f64,
    pub folds: usize,
}

impl Default for SelectionConfig {
    fn default() -> Self {
        Self {
            alpha: 0.5,
            path_len: 100,
            min_ratio: 1e-4,
            folds: 4,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Selection {
    /// Nonzero columns at the chosen penalty, in matrix order.
    pub columns: Vec<Column>,
    pub indices: Vec<usize>,
    pub lambda: f64,
    pub cv_mse: f64,
    /// `(λ, mean validation MSE)` along the path.
    pub path: Vec<(f64, f64)>,
    pub model: ElasticNetModel,
}

impl Selection {
    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }
}

/// Variables kept at the penalty minimizing contiguous-fold CV error.
///
/// Ties in CV error go to the larger penalty. For `α = 0` the path starts at
/// the threshold computed with `α = 10⁻³`.
pub fn select_variables(data: &LagMatrix, cfg: &SelectionConfig) -> Result<Selection> {
    check(0.0, cfg.alpha)?;
    if cfg.folds < 2 {
        return Err(invalid!("cross-validation needs at least 2 folds"));
    }
    if cfg.path_len == 0 || !(cfg.min_ratio > 0.0 && cfg.min_ratio < 1.0) {
        return Err(invalid!("path needs a positive length and a ratio in (0, 1)"));
    }
    if data.n_rows() < 2 * cfg.folds {
        return Err(crate::Error::InsufficientData {
            needed: 2 * cfg.folds,
            available: data.n_rows(),
        });
    }
    let opts = FitOptions::default();
    let centred = Centered::new(data);
    let top = lambda_max_centered(&centred, cfg.alpha.max(1e-3));
    let lambdas = lambda_path(top, cfg.min_ratio, cfg.path_len);
    let bounds = stats::contiguous_folds(data.n_rows(), cfg.folds);

    let fold_errors = crate::par::try_map(&bounds, |&(start, end)| -> Result<Vec<f64>> {
        let train = data.without_rows(start, end);
        let valid = data.slice_rows(start, end);
        let models = fit_path(&train, &lambdas, cfg.alpha, &opts)?;
        Ok(models
            .iter()
            .map(|m| {
                let sse: f64 = valid
                    .rows()
                    .zip(valid.target())
                    .map(|(row, y)| (y - m.predict(row)) * (y - m.predict(row)))
                    .sum();
                sse / valid.n_rows() as f64
            })
            .collect())
    })?;

    let path: Vec<(f64, f64)> = lambdas
        .iter()
        .enumerate()
        .map(|(i, &l)| {
            let mse = fold_errors.iter().map(|f| f[i]).sum::<f64>() / cfg.folds as f64;
            (l, mse)
        })
        .collect();
    let mut best = 0;
    for i in 1..path.len() {
        if path[i].1 < path[best].1 {
            best = i;
        }
    }
    let models = fit_path(data, &lambdas[..=best], cfg.alpha, &opts)?;
    let model = models.into_iter().next_back().expect("nonempty path");
    let indices = model.support();
    Ok(Selection {
        columns: indices.iter().map(|&j| data.columns()[j].clone()).collect(),
        indices,
        lambda: lambdas[best],
        cv_mse: path[best].1,
        path,
        model,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::format;

    fn matrix(cols: &[Vec<f64>], y: &[f64]) -> LagMatrix {
        let n = y.len();
        let data = (0..n).flat_map(|i| cols.iter().map(move |c| c[i])).collect();
        let names = (0..cols.len())
            .map(|j| Column {
                variable: format!("x{j}"),
                lag: 1,
            })
            .collect();
        LagMatrix::from_parts(names, data, y.to_vec()).unwrap()
    }

    #[test]
    fn shrink_threshold_is_exact() {
        assert_eq!(shrink(0.3, 1.0, 0.6, 0.5), 0.0);
        assert_eq!(shrink(0.5, 1.0, 0.5, 0.5), 0.25 / 1.25);
        assert_eq!(shrink(-0.5, 1.0, 0.5, 1.0), 0.0);
        assert_eq!(shrink(2.0, 1.0, 0.0, 0.0), 2.0);
    }

    #[test]
    fn rejects_bad_parameters() {
        let m = matrix(&[vec![1.0, 2.0, 3.0]], &[1.0, 2.0, 4.0]);
        assert!(fit(&m, -1.0, 0.5).is_err());
        assert!(fit(&m, 1.0, 1.5).is_err());
        assert!(lambda_max(&m, 0.0).is_err());
    }

    #[test]
    fn path_is_log_spaced() {
        let p = lambda_path(2.0, 1e-4, 5);
        assert_eq!(p[0], 2.0);
        assert!((p[4] - 2e-4).abs() < 1e-15);
        assert!((p[1] / p[0] - p[2] / p[1]).abs() < 1e-12);
    }
}
