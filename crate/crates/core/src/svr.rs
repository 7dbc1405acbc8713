//! ε-insensitive support vector regression.
//!
//! The dual is solved by two-variable sequential minimal optimization over the
//! split variables `(α, α*)` with the maximal-violating-pair working set. The
//! returned weights are `β_i = α_i − α*_i`.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{invalid, Error, Result};
use crate::metrics;
use crate::series::{LagMatrix, Scaler};
use crate::stats;

/// Curvature floor for the two-variable subproblem (non-PSD kernels).
const TAU: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "lowercase"))]
pub enum KernelKind {
    Linear,
    Rbf,
    Polynomial,
    Sigmoid,
}

impl KernelKind {
    pub fn name(self) -> &'static str {
        match self {
            KernelKind::Linear => "linear",
            KernelKind::Rbf => "rbf",
            KernelKind::Polynomial => "polynomial",
            KernelKind::Sigmoid => "sigmoid",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct KernelSpec {
    pub kind: KernelKind,
    pub gamma: f64,
    pub coef: f64,
    pub degree: u32,
}

impl KernelSpec {
    pub fn linear() -> Self {
        Self {
            kind: KernelKind::Linear,
            gamma: 1.0,
            coef: 0.0,
            degree: 1,
        }
    }

    pub fn rbf(gamma: f64) -> Self {
        Self {
            kind: KernelKind::Rbf,
            gamma,
            coef: 0.0,
            degree: 1,
        }
    }

    pub fn polynomial(gamma: f64, coef: f64, degree: u32) -> Self {
        Self {
            kind: KernelKind::Polynomial,
            gamma,
            coef,
            degree,
        }
    }

    pub fn sigmoid(gamma: f64, coef: f64) -> Self {
        Self {
            kind: KernelKind::Sigmoid,
            gamma,
            coef,
            degree: 1,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self.kind {
            KernelKind::Rbf if !(self.gamma > 0.0) => Err(invalid!("rbf kernel needs gamma > 0")),
            KernelKind::Polynomial if self.degree < 1 => {
                Err(invalid!("polynomial kernel needs degree >= 1"))
            }
            _ if !self.gamma.is_finite() || !self.coef.is_finite() => {
                Err(invalid!("kernel parameters must be finite"))
            }
            _ => Ok(()),
        }
    }

    /// Kernel value without dimension checks.
    #[inline]
    pub fn apply(&self, a: &[f64], b: &[f64]) -> f64 {
        match self.kind {
            KernelKind::Linear => stats::dot(a, b),
            KernelKind::Rbf => libm::exp(-self.gamma * stats::sq_dist(a, b)),
            KernelKind::Polynomial => {
                libm::pow(self.gamma * stats::dot(a, b) + self.coef, self.degree as f64)
            }
            KernelKind::Sigmoid => libm::tanh(self.gamma * stats::dot(a, b) + self.coef),
        }
    }
}

pub fn kernel_eval(spec: &KernelSpec, x1: &[f64], x2: &[f64]) -> Result<f64> {
    if x1.len() != x2.len() {
        return Err(Error::DimensionMismatch {
            expected: x1.len(),
            found: x2.len(),
        });
    }
    Ok(spec.apply(x1, x2))
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SvrConfig {
    pub cost: f64,
    pub epsilon: f64,
    pub kernel: KernelSpec,
    /// Stop when the maximal KKT violation drops to this value.
    pub kkt_tolerance: f64,
    /// Cap on SMO pair updates.
    pub max_passes: usize,
    /// Standardize input columns on the training rows before solving, and solve
    /// in units of the target's standard deviation (the KKT tolerance then
    /// applies in those units).
    pub standardize: bool,
}

impl Default for SvrConfig {
    fn default() -> Self {
        Self {
            cost: 1.0,
            epsilon: 0.1,
            kernel: KernelSpec::linear(),
            kkt_tolerance: 1e-3,
            max_passes: 1_000_000,
            standardize: true,
        }
    }
}

impl SvrConfig {
    pub fn new(cost: f64, epsilon: f64, kernel: KernelSpec) -> Self {
        Self {
            cost,
            epsilon,
            kernel,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.cost > 0.0) || !self.cost.is_finite() {
            return Err(invalid!("SVR cost must be positive"));
        }
        if !(self.epsilon >= 0.0) || !self.epsilon.is_finite() {
            return Err(invalid!("SVR epsilon must be non-negative"));
        }
        if !(self.kkt_tolerance > 0.0) {
            return Err(invalid!("KKT tolerance must be positive"));
        }
        self.kernel.validate()
    }

    /// Deterministic tie-break order: `(C, ε, γ)` then the remaining kernel fields.
    fn order_key(&self) -> (f64, f64, f64, KernelKind, u32, f64) {
        (
            self.cost,
            self.epsilon,
            self.kernel.gamma,
            self.kernel.kind,
            self.kernel.degree,
            self.kernel.coef,
        )
    }
}

/// Raw dual solution over all training rows.
#[derive(Debug, Clone, PartialEq)]
pub struct DualSolution {
    pub beta: Vec<f64>,
    pub bias: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Final maximal KKT violation `m(α) − M(α)`.
    pub violation: f64,
}

/// `−½ βᵀKβ − ε Σ|β_i| + Σ y_i β_i`.
pub fn dual_objective(gram: &[f64], targets: &[f64], beta: &[f64], epsilon: f64) -> f64 {
    let n = targets.len();
    let mut quad = 0.0;
    for i in 0..n {
        let mut row = 0.0;
        for j in 0..n {
            row += gram[i * n + j] * beta[j];
        }
        quad += beta[i] * row;
    }
    let l1: f64 = beta.iter().map(|b| libm::fabs(*b)).sum();
    -0.5 * quad - epsilon * l1 + stats::dot(targets, beta)
}

/// Gram matrix (row-major `n × n`) for row-major inputs of width `p`.
pub fn gram_matrix(kernel: &KernelSpec, inputs: &[f64], p: usize) -> Vec<f64> {
    let n = if p == 0 { 0 } else { inputs.len() / p };
    let mut k = vec![0.0; n * n];
    for i in 0..n {
        let xi = &inputs[i * p..(i + 1) * p];
        for j in i..n {
            let v = kernel.apply(xi, &inputs[j * p..(j + 1) * p]);
            k[i * n + j] = v;
            k[j * n + i] = v;
        }
    }
    k
}

/// SMO on a precomputed Gram matrix.
pub fn solve_dual(gram: &[f64], targets: &[f64], config: &SvrConfig) -> Result<DualSolution> {
    config.validate()?;
    let n = targets.len();
    if gram.len() != n * n {
        return Err(Error::DimensionMismatch {
            expected: n * n,
            found: gram.len(),
        });
    }
    if n < 2 {
        return Err(Error::InsufficientData {
            needed: 2,
            available: n,
        });
    }
    if targets.iter().all(|y| *y == targets[0]) {
        return Ok(DualSolution {
            beta: vec![0.0; n],
            bias: targets[0],
            iterations: 0,
            converged: true,
            violation: 0.0,
        });
    }
    let c = config.cost;
    let eps = config.epsilon;
    let l = 2 * n;
    let sign = |t: usize| if t < n { 1.0 } else { -1.0 };
    let kern = |a: usize, b: usize| gram[(a % n) * n + (b % n)];
    let mut alpha = vec![0.0; l];
    let mut grad: Vec<f64> = (0..l)
        .map(|t| if t < n { eps - targets[t] } else { eps + targets[t - n] })
        .collect();

    let in_up = |a: f64, s: f64| (s > 0.0 && a < c) || (s < 0.0 && a > 0.0);
    let in_low = |a: f64, s: f64| (s > 0.0 && a > 0.0) || (s < 0.0 && a < c);

    let mut iterations = 0;
    let mut violation;
    let mut converged = false;
    loop {
        // second-order working set: i maximally violating, j maximizing the
        // guaranteed decrease given i
        let mut i = usize::MAX;
        let mut g_max = f64::NEG_INFINITY;
        for t in 0..l {
            let s = sign(t);
            let v = -s * grad[t];
            if in_up(alpha[t], s) && v > g_max {
                g_max = v;
                i = t;
            }
        }
        let mut j = usize::MAX;
        let mut g_min = f64::INFINITY;
        let mut best_gain = f64::INFINITY;
        if i != usize::MAX {
            let kii = kern(i, i);
            for t in 0..l {
                let s = sign(t);
                if !in_low(alpha[t], s) {
                    continue;
                }
                let v = -s * grad[t];
                g_min = g_min.min(v);
                let b = g_max - v;
                if b > 0.0 {
                    let mut a = kii + kern(t, t) - 2.0 * kern(i, t);
                    if a <= 0.0 {
                        a = TAU;
                    }
                    let gain = -b * b / a;
                    if gain < best_gain {
                        best_gain = gain;
                        j = t;
                    }
                }
            }
        }
        violation = g_max - g_min;
        if i == usize::MAX || j == usize::MAX || violation <= config.kkt_tolerance {
            converged = true;
            break;
        }
        if iterations >= config.max_passes {
            break;
        }
        iterations += 1;

        let (si, sj) = (sign(i), sign(j));
        let qij = si * sj * kern(i, j);
        let (qii, qjj) = (kern(i, i), kern(j, j));
        let (old_i, old_j) = (alpha[i], alpha[j]);
        if si != sj {
            let mut quad = qii + qjj + 2.0 * qij;
            if quad <= 0.0 {
                quad = TAU;
            }
            let delta = (-grad[i] - grad[j]) / quad;
            let diff = alpha[i] - alpha[j];
            alpha[i] += delta;
            alpha[j] += delta;
            if diff > 0.0 {
                if alpha[j] < 0.0 {
                    alpha[j] = 0.0;
                    alpha[i] = diff;
                }
            } else if alpha[i] < 0.0 {
                alpha[i] = 0.0;
                alpha[j] = -diff;
            }
            if diff > 0.0 {
                if alpha[i] > c {
                    alpha[i] = c;
                    alpha[j] = c - diff;
                }
            } else if alpha[j] > c {
                alpha[j] = c;
                alpha[i] = c + diff;
            }
        } else {
            let mut quad = qii + qjj - 2.0 * qij;
            if quad <= 0.0 {
                quad = TAU;
            }
            let delta = (grad[i] - grad[j]) / quad;
            let sum = alpha[i] + alpha[j];
            alpha[i] -= delta;
            alpha[j] += delta;
            if sum > c {
                if alpha[i] > c {
                    alpha[i] = c;
                    alpha[j] = sum - c;
                }
            } else if alpha[j] < 0.0 {
                alpha[j] = 0.0;
                alpha[i] = sum;
            }
            if sum > c {
                if alpha[j] > c {
                    alpha[j] = c;
                    alpha[i] = sum - c;
                }
            } else if alpha[i] < 0.0 {
                alpha[i] = 0.0;
                alpha[j] = sum;
            }
        }
        // rounding in the clipping arithmetic can leave a bound off by an ulp
        let snap = 1e-12 * c;
        for t in [i, j] {
            if alpha[t] < snap {
                alpha[t] = 0.0;
            } else if alpha[t] > c - snap {
                alpha[t] = c;
            }
        }
        let di = alpha[i] - old_i;
        let dj = alpha[j] - old_j;
        for t in 0..l {
            let st = sign(t);
            grad[t] += st * si * kern(t, i) * di + st * sj * kern(t, j) * dj;
        }
    }

    // offset: average over free variables, else the midpoint of the feasible interval
    let mut ub = f64::INFINITY;
    let mut lb = f64::NEG_INFINITY;
    let mut free_sum = 0.0;
    let mut free = 0usize;
    for t in 0..l {
        let s = sign(t);
        let yg = s * grad[t];
        if alpha[t] >= c {
            if s < 0.0 {
                ub = ub.min(yg);
            } else {
                lb = lb.max(yg);
            }
        } else if alpha[t] <= 0.0 {
            if s > 0.0 {
                ub = ub.min(yg);
            } else {
                lb = lb.max(yg);
            }
        } else {
            free += 1;
            free_sum += yg;
        }
    }
    let rho = if free > 0 {
        free_sum / free as f64
    } else {
        0.5 * (ub + lb)
    };
    let beta = (0..n).map(|k| alpha[k] - alpha[k + n]).collect();
    Ok(DualSolution {
        beta,
        bias: -rho,
        iterations,
        converged,
        violation,
    })
}

/// A trained regressor: `f(x) = Σ β_i K(x_i, x) + b` on scaled inputs.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SvrModel {
    pub kernel: KernelSpec,
    /// Scaled training inputs with nonzero weight.
    pub support_points: Vec<Vec<f64>>,
    pub dual_weights: Vec<f64>,
    pub bias: f64,
    pub scaler: Scaler,
    pub converged: bool,
    pub iterations: usize,
}

impl SvrModel {
    /// Model that always predicts `value`.
    pub fn constant(value: f64, dims: usize) -> Self {
        Self {
            kernel: KernelSpec::linear(),
            support_points: Vec::new(),
            dual_weights: Vec::new(),
            bias: value,
            scaler: Scaler::identity(dims),
            converged: true,
            iterations: 0,
        }
    }

    pub fn dims(&self) -> usize {
        self.scaler.means.len()
    }

    pub fn predict(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.dims() {
            return Err(Error::DimensionMismatch {
                expected: self.dims(),
                found: x.len(),
            });
        }
        let z = self.scaler.transform_row(x);
        Ok(self.predict_scaled(&z))
    }

    fn predict_scaled(&self, z: &[f64]) -> f64 {
        self.support_points
            .iter()
            .zip(&self.dual_weights)
            .map(|(sv, b)| b * self.kernel.apply(sv, z))
            .sum::<f64>()
            + self.bias
    }

    /// Predictions for every row of `data`.
    pub fn predict_matrix(&self, data: &LagMatrix) -> Result<Vec<f64>> {
        data.rows().map(|r| self.predict(r)).collect()
    }
}

/// Solve on `(y − mean) / sd` with `C / sd` and `ε / sd`, the same problem in
/// target-scale-free units, then map the solution back.
fn solve_scaled(gram: &[f64], targets: &[f64], config: &SvrConfig) -> Result<DualSolution> {
    let mean = crate::stats::mean(targets);
    let sd = crate::stats::std_dev(targets);
    if !(sd > 0.0) || !sd.is_finite() {
        return solve_dual(gram, targets, config);
    }
    let scaled: Vec<f64> = targets.iter().map(|y| (y - mean) / sd).collect();
    let cfg = SvrConfig {
        cost: config.cost / sd,
        epsilon: config.epsilon / sd,
        ..*config
    };
    let sol = solve_dual(gram, &scaled, &cfg)?;
    Ok(DualSolution {
        beta: sol.beta.iter().map(|b| b * sd).collect(),
        bias: sol.bias * sd + mean,
        violation: sol.violation * sd,
        ..sol
    })
}

pub fn train(data: &LagMatrix, config: &SvrConfig) -> Result<SvrModel> {
    Ok(train_detailed(data, config)?.0)
}

/// Train and also return the full dual solution and the Gram matrix used.
pub fn train_detailed(data: &LagMatrix, config: &SvrConfig) -> Result<(SvrModel, DualSolution, Vec<f64>)> {
    config.validate()?;
    let n = data.n_rows();
    if n < 2 {
        return Err(Error::InsufficientData {
            needed: 2,
            available: n,
        });
    }
    if data.target().iter().any(|v| !v.is_finite()) {
        return Err(invalid!("SVR targets must be finite"));
    }
    let p = data.n_cols();
    let scaler = if config.standardize {
        Scaler::fit(data)
    } else {
        Scaler::identity(p)
    };
    let inputs: Vec<f64> = data.rows().flat_map(|r| scaler.transform_row(r)).collect();
    let gram = gram_matrix(&config.kernel, &inputs, p);
    let sol = if config.standardize {
        solve_scaled(&gram, data.target(), config)?
    } else {
        solve_dual(&gram, data.target(), config)?
    };
    let mut support_points = Vec::new();
    let mut dual_weights = Vec::new();
    for (r, b) in sol.beta.iter().enumerate() {
        if *b != 0.0 {
            support_points.push(inputs[r * p..(r + 1) * p].to_vec());
            dual_weights.push(*b);
        }
    }
    let model = SvrModel {
        kernel: config.kernel,
        support_points,
        dual_weights,
        bias: sol.bias,
        scaler,
        converged: sol.converged,
        iterations: sol.iterations,
    };
    Ok((model, sol, gram))
}

/// Hyperparameter lists expanded into a grid of configurations.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct GridSpec {
    pub kernels: Vec<KernelKind>,
    pub costs: Vec<f64>,
    pub epsilons: Vec<f64>,
    pub gammas: Vec<f64>,
    pub degrees: Vec<u32>,
    pub coefs: Vec<f64>,
}

fn powers_of_two(lo: i32, hi: i32) -> Vec<f64> {
    (lo..=hi).map(|e| libm::pow(2.0, e as f64)).collect()
}

impl GridSpec {
    /// The exhaustive default: all four kernels over wide power-of-two ranges.
    pub fn full() -> Self {
        Self {
            kernels: vec![
                KernelKind::Linear,
                KernelKind::Rbf,
                KernelKind::Polynomial,
                KernelKind::Sigmoid,
            ],
            costs: powers_of_two(-5, 10),
            epsilons: vec![0.001, 0.01, 0.05, 0.1, 0.5],
            gammas: powers_of_two(-10, 3),
            degrees: vec![2, 3],
            coefs: vec![0.0, 1.0],
        }
    }

    /// A small linear/RBF grid suited to quick desk-scale runs.
    pub fn compact() -> Self {
        Self {
            kernels: vec![KernelKind::Linear, KernelKind::Rbf],
            costs: vec![0.25, 1.0, 4.0, 16.0, 64.0],
            epsilons: vec![0.01, 0.1, 0.5],
            gammas: vec![0.01, 0.1],
            degrees: vec![2],
            coefs: vec![0.0],
        }
    }

    pub fn expand(&self) -> Vec<SvrConfig> {
        let mut out = Vec::new();
        for &kind in &self.kernels {
            for &c in &self.costs {
                for &e in &self.epsilons {
                    match kind {
                        KernelKind::Linear => {
                            out.push(SvrConfig::new(c, e, KernelSpec::linear()));
                        }
                        KernelKind::Rbf => {
                            for &g in &self.gammas {
                                out.push(SvrConfig::new(c, e, KernelSpec::rbf(g)));
                            }
                        }
                        KernelKind::Polynomial => {
                            for &g in &self.gammas {
                                for &d in &self.degrees {
                                    for &r in &self.coefs {
                                        out.push(SvrConfig::new(
                                            c,
                                            e,
                                            KernelSpec::polynomial(g, r, d),
                                        ));
                                    }
                                }
                            }
                        }
                        KernelKind::Sigmoid => {
                            for &g in &self.gammas {
                                for &r in &self.coefs {
                                    out.push(SvrConfig::new(c, e, KernelSpec::sigmoid(g, r)));
                                }
                            }
                        }
                    }
                }
            }
        }
        out
    }
}

/// How validation error is scored in cross-validation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum CvScoring<'a> {
    /// MAPE against the validation targets.
    Mape,
    /// Mean `|ŷ − y| / |d|` in percent with per-row denominators `d`.
    ///
    /// Used for components whose own level crosses zero: the error of a
    /// component is measured relative to the level of the series it belongs to.
    RelativeTo(&'a [f64]),
}

#[derive(Debug, Clone, PartialEq)]
pub struct CvEntry {
    pub config: SvrConfig,
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridSearchResult {
    pub best: SvrConfig,
    pub best_score: f64,
    pub table: Vec<CvEntry>,
}

fn fold_score(
    data: &LagMatrix,
    config: &SvrConfig,
    fold: (usize, usize),
    scoring: CvScoring<'_>,
) -> Result<f64> {
    let (start, end) = fold;
    let train_rows = data.without_rows(start, end);
    let valid = data.slice_rows(start, end);
    let model = train(&train_rows, config)?;
    let pred = model.predict_matrix(&valid)?;
    match scoring {
        CvScoring::Mape => metrics::mape(valid.target(), &pred),
        CvScoring::RelativeTo(d) => {
            let denom = &d[start..end];
            metrics::mape(denom, &residual_shift(denom, valid.target(), &pred))
        }
    }
}

// forecast values `d + (ŷ − y)` so that mape(d, ·) = mean |ŷ − y| / |d|
fn residual_shift(denom: &[f64], actual: &[f64], pred: &[f64]) -> Vec<f64> {
    denom
        .iter()
        .zip(actual.iter().zip(pred))
        .map(|(d, (y, f))| d + (f - y))
        .collect()
}

/// Contiguous-block k-fold cross-validation over `grid`.
pub fn grid_search(
    data: &LagMatrix,
    grid: &[SvrConfig],
    folds: usize,
    scoring: CvScoring<'_>,
) -> Result<GridSearchResult> {
    if grid.is_empty() {
        return Err(Error::EmptyGrid);
    }
    if folds < 2 {
        return Err(invalid!("cross-validation needs at least 2 folds"));
    }
    if data.n_rows() < folds {
        return Err(Error::InsufficientData {
            needed: folds,
            available: data.n_rows(),
        });
    }
    if let CvScoring::RelativeTo(d) = scoring {
        if d.len() != data.n_rows() {
            return Err(Error::LengthMismatch {
                left: d.len(),
                right: data.n_rows(),
            });
        }
    }
    let bounds = stats::contiguous_folds(data.n_rows(), folds);
    let cells: Vec<(usize, usize)> = (0..grid.len())
        .flat_map(|g| (0..folds).map(move |f| (g, f)))
        .collect();
    let cell_scores = crate::par::try_map(&cells, |&(g, f)| fold_score(data, &grid[g], bounds[f], scoring))?;

    let mut table = Vec::with_capacity(grid.len());
    for (g, config) in grid.iter().enumerate() {
        let s: f64 = cell_scores[g * folds..(g + 1) * folds].iter().sum::<f64>() / folds as f64;
        table.push(CvEntry {
            config: *config,
            score: s,
        });
    }
    let mut best = 0;
    for g in 1..table.len() {
        let (a, b) = (table[g].score, table[best].score);
        let better = a < b
            || (a == b
                && table[g]
                    .config
                    .order_key()
                    .partial_cmp(&table[best].config.order_key())
                    == Some(core::cmp::Ordering::Less));
        if better || (b.is_nan() && !a.is_nan()) {
            best = g;
        }
    }
    Ok(GridSearchResult {
        best: table[best].config,
        best_score: table[best].score,
        table,
    })
}
