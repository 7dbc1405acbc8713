//! Independent reference computations used only by tests.
//!
//! Nothing here calls into the solver paths it is used to check.
#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};

/// SVR dual by accelerated proximal gradient in `β`-space:
/// minimize `½βᵀKβ − yᵀβ + ε‖β‖₁` over `{Σβ = 0, |β_i| ≤ C}`.
/// Returns `(β, dual objective)` with the objective in maximization form.
pub fn svr_dual_qp(gram: &[f64], y: &[f64], cost: f64, eps: f64, iters: usize) -> (Vec<f64>, f64) {
    let n = y.len();
    let k = DMatrix::from_row_slice(n, n, gram);
    let eig = k.clone().symmetric_eigen();
    let lip = eig.eigenvalues.iter().fold(0.0f64, |a, v| a.max(v.abs())).max(1e-12);
    let step = 1.0 / lip;
    let yv = DVector::from_column_slice(y);
    let mut beta = DVector::zeros(n);
    let mut prev = beta.clone();
    let mut z = beta.clone();
    let mut t = 1.0f64;
    let obj = |b: &DVector<f64>| -> f64 {
        let q = (b.transpose() * &k * b)[(0, 0)];
        -0.5 * q - eps * b.iter().map(|v| v.abs()).sum::<f64>() + yv.dot(b)
    };
    let mut last_obj = obj(&beta);
    for _ in 0..iters {
        let grad = &k * &z - &yv;
        let v = &z - grad * step;
        let next = prox_box_hyperplane(v.as_slice(), eps * step, cost);
        let next = DVector::from_vec(next);
        let moved = (&next - &beta).amax();
        let next_obj = obj(&next);
        // adaptive restart when the objective gets worse
        if next_obj < last_obj {
            t = 1.0;
            z = beta.clone();
            continue;
        }
        let t_next = 0.5 * (1.0 + (1.0 + 4.0 * t * t).sqrt());
        z = &next + (&next - &beta) * ((t - 1.0) / t_next);
        prev = beta;
        beta = next;
        last_obj = next_obj;
        t = t_next;
        if moved <= 1e-15 * cost.max(1.0) {
            break;
        }
    }
    let _ = prev;
    let o = obj(&beta);
    (beta.as_slice().to_vec(), o)
}

/// `argmin_b ½‖b − v‖² + λ‖b‖₁` subject to `Σb = 0`, `|b_i| ≤ c`. The sum is
/// piecewise linear and nonincreasing in the equality multiplier, so the root
/// is found exactly between sorted breakpoints.
fn prox_box_hyperplane(v: &[f64], lam: f64, c: f64) -> Vec<f64> {
    let shrink = |x: f64, mu: f64| -> f64 {
        let w = x - mu;
        (w.signum() * (w.abs() - lam).max(0.0)).clamp(-c, c)
    };
    let sum = |mu: f64| v.iter().map(|x| shrink(*x, mu)).sum::<f64>();
    let mut knots: Vec<f64> = v
        .iter()
        .flat_map(|x| [x - lam - c, x - lam, x + lam, x + lam + c])
        .collect();
    knots.sort_by(f64::total_cmp);
    // sum(knots[lo]) >= 0 >= sum(knots[hi])
    let (mut lo, mut hi) = (0, knots.len() - 1);
    while hi - lo > 1 {
        let mid = (lo + hi) / 2;
        if sum(knots[mid]) >= 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let (a, b) = (knots[lo], knots[hi]);
    let (fa, fb) = (sum(a), sum(b));
    let mu = if fa - fb > 0.0 { a + (b - a) * fa / (fa - fb) } else { a };
    v.iter().map(|x| shrink(*x, mu)).collect()
}

/// Offset from the KKT conditions of a given dual point.
pub fn svr_bias(gram: &[f64], y: &[f64], beta: &[f64], cost: f64, eps: f64) -> f64 {
    let n = y.len();
    let tol = 1e-7 * cost.max(1.0);
    let g: Vec<f64> = (0..n)
        .map(|i| (0..n).map(|j| gram[i * n + j] * beta[j]).sum())
        .collect();
    let mut free = Vec::new();
    let (mut lo, mut hi) = (f64::NEG_INFINITY, f64::INFINITY);
    for i in 0..n {
        let b = beta[i];
        if b > tol && b < cost - tol {
            free.push(y[i] - eps - g[i]);
        } else if b < -tol && b > -cost + tol {
            free.push(y[i] + eps - g[i]);
        } else if b.abs() <= tol {
            lo = lo.max(y[i] - eps - g[i]);
            hi = hi.min(y[i] + eps - g[i]);
        } else if b > 0.0 {
            hi = hi.min(y[i] - eps - g[i]);
        } else {
            lo = lo.max(y[i] + eps - g[i]);
        }
    }
    if !free.is_empty() {
        free.iter().sum::<f64>() / free.len() as f64
    } else {
        0.5 * (lo + hi)
    }
}

/// Natural cubic spline via the dense `4(m−1)` coefficient system.
pub struct DenseSpline {
    xs: Vec<f64>,
    coef: Vec<[f64; 4]>,
}

impl DenseSpline {
    pub fn new(xs: &[f64], ys: &[f64]) -> Self {
        let m = xs.len();
        let segs = m - 1;
        let dim = 4 * segs;
        let mut a = DMatrix::<f64>::zeros(dim, dim);
        let mut b = DVector::<f64>::zeros(dim);
        let mut row = 0;
        // piece s: a + b(x - x_s) + c(x - x_s)^2 + d(x - x_s)^3
        for s in 0..segs {
            let h = xs[s + 1] - xs[s];
            a[(row, 4 * s)] = 1.0;
            b[row] = ys[s];
            row += 1;
            a[(row, 4 * s)] = 1.0;
            a[(row, 4 * s + 1)] = h;
            a[(row, 4 * s + 2)] = h * h;
            a[(row, 4 * s + 3)] = h * h * h;
            b[row] = ys[s + 1];
            row += 1;
        }
        for s in 0..segs.saturating_sub(1) {
            let h = xs[s + 1] - xs[s];
            // first derivative continuity
            a[(row, 4 * s + 1)] = 1.0;
            a[(row, 4 * s + 2)] = 2.0 * h;
            a[(row, 4 * s + 3)] = 3.0 * h * h;
            a[(row, 4 * (s + 1) + 1)] = -1.0;
            row += 1;
            // second derivative continuity
            a[(row, 4 * s + 2)] = 2.0;
            a[(row, 4 * s + 3)] = 6.0 * h;
            a[(row, 4 * (s + 1) + 2)] = -2.0;
            row += 1;
        }
        let hl = xs[m - 1] - xs[m - 2];
        a[(row, 2)] = 2.0;
        row += 1;
        a[(row, 4 * (segs - 1) + 2)] = 2.0;
        a[(row, 4 * (segs - 1) + 3)] = 6.0 * hl;
        let sol = a.lu().solve(&b).expect("spline system solvable");
        let coef = (0..segs)
            .map(|s| [sol[4 * s], sol[4 * s + 1], sol[4 * s + 2], sol[4 * s + 3]])
            .collect();
        Self {
            xs: xs.to_vec(),
            coef,
        }
    }

    pub fn eval(&self, x: f64) -> f64 {
        let segs = self.coef.len();
        let mut s = 0;
        while s + 1 < segs && x >= self.xs[s + 1] {
            s += 1;
        }
        let d = x - self.xs[s];
        let c = self.coef[s];
        c[0] + c[1] * d + c[2] * d * d + c[3] * d * d * d
    }
}

/// Least squares via SVD.
pub fn ols(rows: &[Vec<f64>], y: &[f64]) -> Vec<f64> {
    let n = rows.len();
    let p = rows[0].len();
    let x = DMatrix::from_fn(n, p, |i, j| rows[i][j]);
    let yv = DVector::from_column_slice(y);
    let svd = x.svd(true, true);
    svd.solve(&yv, 1e-12).expect("svd solve").as_slice().to_vec()
}

/// Deterministic xorshift stream for fixture generation inside tests.
pub struct TestRng(u64);

impl TestRng {
    pub fn new(seed: u64) -> Self {
        Self(seed.wrapping_mul(0x9E37_79B9_7F4A_7C15) | 1)
    }

    pub fn next_u64(&mut self) -> u64 {
        let mut x = self.0;
        x ^= x << 13;
        x ^= x >> 7;
        x ^= x << 17;
        self.0 = x;
        x
    }

    pub fn uniform(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 / (1u64 << 53) as f64
    }

    pub fn range(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.uniform()
    }

    pub fn normal(&mut self) -> f64 {
        let u1 = self.uniform().max(1e-300);
        let u2 = self.uniform();
        (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
    }
}
