//! Small numeric helpers shared across modules.

pub fn mean(x: &[f64]) -> f64 {
    if x.is_empty() {
        return 0.0;
    }
    x.iter().sum::<f64>() / x.len() as f64
}

/// Population variance (divisor `n`).
pub fn variance(x: &[f64]) -> f64 {
    if x.is_empty() {
        return 0.0;
    }
    let m = mean(x);
    x.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / x.len() as f64
}

/// Population standard deviation (divisor `n`).
pub fn std_dev(x: &[f64]) -> f64 {
    libm::sqrt(variance(x))
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

pub fn rmse(a: &[f64], b: &[f64]) -> f64 {
    if a.is_empty() {
        return 0.0;
    }
    libm::sqrt(sq_dist(a, b) / a.len() as f64)
}

/// Pearson correlation; 0 when either side has zero variance.
pub fn correlation(a: &[f64], b: &[f64]) -> f64 {
    let ma = mean(a);
    let mb = mean(b);
    let mut sab = 0.0;
    let mut saa = 0.0;
    let mut sbb = 0.0;
    for (x, y) in a.iter().zip(b) {
        sab += (x - ma) * (y - mb);
        saa += (x - ma) * (x - ma);
        sbb += (y - mb) * (y - mb);
    }
    if saa == 0.0 || sbb == 0.0 {
        return 0.0;
    }
    sab / libm::sqrt(saa * sbb)
}

/// Contiguous fold boundaries `[start, end)` over `n` rows.
pub fn contiguous_folds(n: usize, folds: usize) -> alloc::vec::Vec<(usize, usize)> {
    let base = n / folds;
    let extra = n % folds;
    let mut out = alloc::vec::Vec::with_capacity(folds);
    let mut start = 0;
    for k in 0..folds {
        let len = base + usize::from(k < extra);
        out.push((start, start + len));
        start += len;
    }
    out
}
