//! Empirical mode decomposition, its noise-assisted ensemble variant, and the
//! smooth/fluctuating partition built from the resulting modes.
//!
//! Sifting uses natural cubic envelopes through the local extrema. Each end is
//! extended by mirroring the two extrema nearest to it about the end sample,
//! unless an extremum already sits on the end sample.

use alloc::vec;
use alloc::vec::Vec;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{invalid, Error, Result};
use crate::spline::NaturalCubicSpline;
use crate::stats;

/// Noise amplitudes (fractions of the signal sd) tried when none are given.
pub const DEFAULT_AMPLITUDES: [f64; 5] = [0.05, 0.1, 0.2, 0.3, 0.4];
pub const DEFAULT_ENSEMBLE_SIZE: usize = 100;

/// Interior local extrema; a plateau counts once at its (floor) midpoint.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Extrema {
    pub maxima: Vec<usize>,
    pub minima: Vec<usize>,
}

impl Extrema {
    pub fn count(&self) -> usize {
        self.maxima.len() + self.minima.len()
    }
}

pub fn find_extrema(x: &[f64]) -> Extrema {
    let n = x.len();
    let mut out = Extrema::default();
    if n < 3 {
        return out;
    }
    let mut i = 1;
    while i < n - 1 {
        if x[i] == x[i - 1] {
            i += 1;
            continue;
        }
        let rising = x[i] > x[i - 1];
        let mut j = i;
        while j + 1 < n && x[j + 1] == x[i] {
            j += 1;
        }
        if j + 1 < n {
            let mid = (i + j) / 2;
            if rising && x[j + 1] < x[i] {
                out.maxima.push(mid);
            } else if !rising && x[j + 1] > x[i] {
                out.minima.push(mid);
            }
        }
        i = j + 1;
    }
    out
}

/// Sign changes, ignoring exact zeros between them.
pub fn zero_crossings(x: &[f64]) -> usize {
    let mut prev = 0.0f64;
    let mut count = 0;
    for &v in x {
        if v == 0.0 {
            continue;
        }
        if prev != 0.0 && (v > 0.0) != (prev > 0.0) {
            count += 1;
        }
        prev = v;
    }
    count
}

/// `|#extrema − #zero-crossings| ≤ 1`.
pub fn satisfies_imf_property(x: &[f64]) -> bool {
    let e = find_extrema(x).count();
    let z = zero_crossings(x);
    e.abs_diff(z) <= 1
}

/// Cubic envelope through `x` at `anchors`, evaluated at every sample.
pub fn envelope(x: &[f64], anchors: &[usize]) -> Result<Vec<f64>> {
    let n = x.len();
    if anchors.is_empty() || anchors.iter().any(|&a| a >= n) {
        return Err(invalid!("envelope anchors must be nonempty and in range"));
    }
    let last = (n - 1) as f64;
    let mut knots: Vec<(f64, f64)> = Vec::with_capacity(anchors.len() + 4);
    if anchors[0] != 0 {
        for &a in anchors.iter().take(2).rev() {
            knots.push((-(a as f64), x[a]));
        }
    }
    knots.extend(anchors.iter().map(|&a| (a as f64, x[a])));
    if anchors[anchors.len() - 1] != n - 1 {
        for &a in anchors.iter().rev().take(2) {
            knots.push((2.0 * last - a as f64, x[a]));
        }
    }
    if knots.len() < 2 {
        return Err(invalid!("envelope needs at least 2 anchors after extension"));
    }
    let (xs, ys): (Vec<f64>, Vec<f64>) = knots.into_iter().unzip();
    if ys.iter().all(|v| *v == ys[0]) {
        return Ok(vec![ys[0]; n]);
    }
    let spline = NaturalCubicSpline::new(&xs, &ys)?;
    Ok((0..n).map(|i| spline.eval(i as f64)).collect())
}

const MIRRORED: usize = 2;

fn rev(idx: &[usize]) -> Vec<usize> {
    idx.iter().rev().copied().collect()
}

/// Mirror knots for the start of the signal: `(maxima, minima, axis)`.
fn left_mirror(x: &[f64], maxs: &[usize], mins: &[usize]) -> (Vec<usize>, Vec<usize>, usize) {
    let nb = MIRRORED;
    let (mut lmax, mut lmin, mut axis);
    if maxs[0] < mins[0] {
        if x[0] > x[mins[0]] {
            lmax = rev(&maxs[1.min(maxs.len())..maxs.len().min(nb + 1)]);
            lmin = rev(&mins[..mins.len().min(nb)]);
            axis = maxs[0];
        } else {
            lmax = rev(&maxs[..maxs.len().min(nb)]);
            lmin = rev(&mins[..mins.len().min(nb - 1)]);
            lmin.push(0);
            axis = 0;
        }
    } else if x[0] < x[maxs[0]] {
        lmax = rev(&maxs[..maxs.len().min(nb)]);
        lmin = rev(&mins[1.min(mins.len())..mins.len().min(nb + 1)]);
        axis = mins[0];
    } else {
        lmax = rev(&maxs[..maxs.len().min(nb - 1)]);
        lmax.push(0);
        lmin = rev(&mins[..mins.len().min(nb)]);
        axis = 0;
    }
    // mirrored knots must reach past the first sample, else reflect about it
    let reaches = |l: &[usize], axis: usize| l.first().is_some_and(|&i| 2 * axis as isize - (i as isize) <= 0);
    if axis != 0 && !(reaches(&lmax, axis) && reaches(&lmin, axis)) {
        if axis == maxs[0] {
            lmax = rev(&maxs[..maxs.len().min(nb)]);
        } else {
            lmin = rev(&mins[..mins.len().min(nb)]);
        }
        axis = 0;
    }
    (lmax, lmin, axis)
}

/// Knot positions and values for one envelope: mirrored left part, interior
/// extrema, mirrored right part.
fn knots(x: &[f64], left: (&[usize], usize), interior: &[usize], right: (&[usize], usize)) -> (Vec<f64>, Vec<f64>) {
    let mut xs = Vec::with_capacity(interior.len() + left.0.len() + right.0.len());
    let mut ys = Vec::with_capacity(xs.capacity());
    for &i in left.0 {
        xs.push(2.0 * left.1 as f64 - i as f64);
        ys.push(x[i]);
    }
    for &i in interior {
        xs.push(i as f64);
        ys.push(x[i]);
    }
    for &i in right.0.iter().rev() {
        xs.push(2.0 * right.1 as f64 - i as f64);
        ys.push(x[i]);
    }
    (xs, ys)
}

fn eval_spline(xs: &[f64], ys: &[f64], n: usize) -> Result<Vec<f64>> {
    if ys.iter().all(|v| *v == ys[0]) {
        return Ok(vec![ys[0]; n]);
    }
    let spline = NaturalCubicSpline::new(xs, ys)?;
    Ok((0..n).map(|i| spline.eval(i as f64)).collect())
}

/// Upper and lower envelopes with the end treatment of Rilling, Flandrin and
/// Gonçalves: at each end the two nearest extrema of each kind are mirrored
/// about the outermost extremum, or about the end sample itself (which then
/// joins the envelope) when the end value lies beyond that extremum.
///
/// Falls back to [`envelope`] per side when there are fewer than three extrema.
pub fn envelopes(x: &[f64], ext: &Extrema) -> Result<(Vec<f64>, Vec<f64>)> {
    let n = x.len();
    let (maxs, mins) = (&ext.maxima, &ext.minima);
    if maxs.is_empty() || mins.is_empty() || maxs.len() + mins.len() < 3 {
        return Ok((envelope(x, maxs)?, envelope(x, mins)?));
    }
    let (lmax, lmin, laxis) = left_mirror(x, maxs, mins);
    // the right end is the left end of the reversed signal
    let xr: Vec<f64> = x.iter().rev().copied().collect();
    let flip = |v: &[usize]| -> Vec<usize> { v.iter().rev().map(|&i| n - 1 - i).collect() };
    let (rmax_r, rmin_r, raxis_r) = left_mirror(&xr, &flip(maxs), &flip(mins));
    let back = |v: &[usize]| -> Vec<usize> { v.iter().map(|&i| n - 1 - i).collect() };
    let (rmax, rmin, raxis) = (back(&rmax_r), back(&rmin_r), n - 1 - raxis_r);
    let (ux, uy) = knots(x, (&lmax, laxis), maxs, (&rmax, raxis));
    let (lx, ly) = knots(x, (&lmin, laxis), mins, (&rmin, raxis));
    Ok((eval_spline(&ux, &uy, n)?, eval_spline(&lx, &ly, n)?))
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SiftOptions {
    /// Stop once `Σ(h_prev − h)² / Σ h_prev²` falls below this and `h` is an IMF.
    pub sd_threshold: f64,
    pub max_iterations: usize,
    /// Hard cap on the number of modes extracted by [`emd_with`].
    pub max_imfs: usize,
}

impl Default for SiftOptions {
    fn default() -> Self {
        Self {
            sd_threshold: 0.2,
            max_iterations: 100,
            max_imfs: 20,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Sifted {
    pub imf: Vec<f64>,
    /// Sum of the subtracted envelope means, i.e. the input minus `imf` built
    /// without cancellation.
    pub remainder: Vec<f64>,
    pub iterations: usize,
    /// False when the iteration cap was hit before the stop rule held.
    pub converged: bool,
}

pub fn sift(x: &[f64]) -> Result<Sifted> {
    sift_with(x, &SiftOptions::default())
}

pub fn sift_with(x: &[f64], opts: &SiftOptions) -> Result<Sifted> {
    let ext = find_extrema(x);
    if ext.maxima.is_empty() || ext.minima.is_empty() {
        return Err(Error::Precondition(alloc::format!(
            "sifting needs a maximum and a minimum, found {} and {}",
            ext.maxima.len(),
            ext.minima.len()
        )));
    }
    let mut h = x.to_vec();
    let mut remainder = vec![0.0; x.len()];
    let mut ext = ext;
    for it in 1..=opts.max_iterations {
        let (upper, lower) = envelopes(&h, &ext)?;
        let mut num = 0.0;
        let mut den = 0.0;
        for i in 0..h.len() {
            let m = 0.5 * (upper[i] + lower[i]);
            num += m * m;
            den += h[i] * h[i];
            remainder[i] += m;
            h[i] = x[i] - remainder[i];
        }
        let sd = if den > 0.0 { num / den } else { 0.0 };
        ext = find_extrema(&h);
        let imf_like = ext.count().abs_diff(zero_crossings(&h)) <= 1;
        if sd < opts.sd_threshold && imf_like {
            return Ok(Sifted {
                imf: h,
                remainder,
                iterations: it,
                converged: true,
            });
        }
        if ext.maxima.is_empty() || ext.minima.is_empty() {
            return Ok(Sifted {
                imf: h,
                remainder,
                iterations: it,
                converged: imf_like,
            });
        }
    }
    Ok(Sifted {
        imf: h,
        remainder,
        iterations: opts.max_iterations,
        converged: false,
    })
}

/// Additive decomposition `source = Σ imfs + residual`.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ImfDecomposition {
    pub source: Vec<f64>,
    /// Highest frequency first.
    pub imfs: Vec<Vec<f64>>,
    pub residual: Vec<f64>,
    /// Fraction of the source sd used for the added noise.
    pub noise_amplitude: f64,
    pub ensemble_size: usize,
    /// Number of sifts that hit the iteration cap (summed over trials).
    pub unconverged_sifts: usize,
}

impl ImfDecomposition {
    pub fn len(&self) -> usize {
        self.source.len()
    }

    pub fn is_empty(&self) -> bool {
        self.source.is_empty()
    }

    pub fn n_imfs(&self) -> usize {
        self.imfs.len()
    }

    /// `|x − (Σ imfs + r)| / |x|` in the Euclidean norm.
    pub fn reconstruction_error(&self) -> f64 {
        let mut num = 0.0;
        let mut den = 0.0;
        for i in 0..self.len() {
            let rebuilt = self.imfs.iter().map(|m| m[i]).sum::<f64>() + self.residual[i];
            num += (self.source[i] - rebuilt) * (self.source[i] - rebuilt);
            den += self.source[i] * self.source[i];
        }
        if den == 0.0 {
            libm::sqrt(num)
        } else {
            libm::sqrt(num / den)
        }
    }
}

pub fn emd(x: &[f64]) -> Result<ImfDecomposition> {
    emd_with(x, &SiftOptions::default())
}

/// Extract modes until the remainder has at most one interior extremum.
pub fn emd_with(x: &[f64], opts: &SiftOptions) -> Result<ImfDecomposition> {
    if x.len() < 8 {
        return Err(Error::InsufficientData {
            needed: 8,
            available: x.len(),
        });
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(invalid!("signal contains non-finite values"));
    }
    let mut residual = x.to_vec();
    let mut imfs = Vec::new();
    let mut unconverged = 0;
    let scale = span(x);
    while imfs.len() < opts.max_imfs
        && find_extrema(&residual).count() >= 2
        && span(&residual) > 1e-12 * scale
    {
        let s = sift_with(&residual, opts)?;
        if !s.converged {
            unconverged += 1;
        }
        residual = s.remainder;
        imfs.push(s.imf);
    }
    Ok(ImfDecomposition {
        source: x.to_vec(),
        imfs,
        residual,
        noise_amplitude: 0.0,
        ensemble_size: 1,
        unconverged_sifts: unconverged,
    })
}

/// Peak-to-peak range.
fn span(x: &[f64]) -> f64 {
    let (lo, hi) = x
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(*v), hi.max(*v)));
    hi - lo
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct EemdParams {
    pub noise_amplitude: f64,
    pub ensemble_size: usize,
    pub seed: u64,
}

impl Default for EemdParams {
    fn default() -> Self {
        Self {
            noise_amplitude: 0.2,
            ensemble_size: DEFAULT_ENSEMBLE_SIZE,
            seed: 0,
        }
    }
}

fn trial_rng(seed: u64, trial: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(trial as u64);
    rng
}

fn run_trial(x: &[f64], noise_sd: f64, seed: u64, trial: usize, opts: &SiftOptions) -> Result<ImfDecomposition> {
    if noise_sd == 0.0 {
        return emd_with(x, opts);
    }
    let mut rng = trial_rng(seed, trial);
    let noisy: Vec<f64> = x
        .iter()
        .map(|v| {
            let z: f64 = StandardNormal.sample(&mut rng);
            v + noise_sd * z
        })
        .collect();
    emd_with(&noisy, opts)
}

pub fn eemd(x: &[f64], noise_amplitude: f64, ensemble_size: usize, seed: u64) -> Result<ImfDecomposition> {
    eemd_with(
        x,
        &EemdParams {
            noise_amplitude,
            ensemble_size,
            seed,
        },
        &SiftOptions::default(),
    )
}

/// Ensemble EMD.
///
/// Trial `k` decomposes `x + ε_k` with `ε_k` white Gaussian noise of sd
/// `noise_amplitude · sd(x)`, drawn from a ChaCha8 stream `k` keyed by `seed`.
/// The number of averaged modes is the most frequent trial mode count (ties to
/// the smaller count); shorter trials contribute zeros for their missing
/// low-frequency modes and modes beyond that count are left to the residual.
/// The residual is `x` minus the averaged modes, so the result is exactly additive.
pub fn eemd_with(x: &[f64], params: &EemdParams, opts: &SiftOptions) -> Result<ImfDecomposition> {
    if !(params.noise_amplitude >= 0.0) || !params.noise_amplitude.is_finite() {
        return Err(invalid!("noise amplitude must be finite and non-negative"));
    }
    if params.ensemble_size == 0 {
        return Err(invalid!("ensemble size must be at least 1"));
    }
    if x.len() < 8 {
        return Err(Error::InsufficientData {
            needed: 8,
            available: x.len(),
        });
    }
    let noise_sd = params.noise_amplitude * stats::std_dev(x);
    if noise_sd == 0.0 {
        // every trial is the plain decomposition
        let mut dec = emd_with(x, opts)?;
        dec.ensemble_size = params.ensemble_size;
        dec.unconverged_sifts *= params.ensemble_size;
        return Ok(dec);
    }
    let trials = run_trials(x, noise_sd, params, opts)?;

    let mut counts: Vec<usize> = trials.iter().map(|t| t.n_imfs()).collect();
    counts.sort_unstable();
    let modes = mode_of_sorted(&counts);

    let n = x.len();
    let mut imfs: Vec<Vec<f64>> = Vec::with_capacity(modes);
    for i in 0..modes {
        let mut acc: Option<Vec<f64>> = None;
        for t in &trials {
            if let Some(m) = t.imfs.get(i) {
                match acc.as_mut() {
                    None => acc = Some(m.clone()),
                    Some(a) => a.iter_mut().zip(m).for_each(|(a, v)| *a += v),
                }
            }
        }
        let mut avg = acc.unwrap_or_else(|| vec![0.0; n]);
        let k = trials.len() as f64;
        avg.iter_mut().for_each(|v| *v /= k);
        imfs.push(avg);
    }
    let mut residual = x.to_vec();
    for m in &imfs {
        residual.iter_mut().zip(m).for_each(|(r, v)| *r -= v);
    }
    Ok(ImfDecomposition {
        source: x.to_vec(),
        imfs,
        residual,
        noise_amplitude: params.noise_amplitude,
        ensemble_size: params.ensemble_size,
        unconverged_sifts: trials.iter().map(|t| t.unconverged_sifts).sum(),
    })
}

#[cfg(feature = "parallel")]
fn run_trials(x: &[f64], noise_sd: f64, params: &EemdParams, opts: &SiftOptions) -> Result<Vec<ImfDecomposition>> {
    use rayon::prelude::*;
    (0..params.ensemble_size)
        .into_par_iter()
        .map(|k| run_trial(x, noise_sd, params.seed, k, opts))
        .collect()
}

#[cfg(not(feature = "parallel"))]
fn run_trials(x: &[f64], noise_sd: f64, params: &EemdParams, opts: &SiftOptions) -> Result<Vec<ImfDecomposition>> {
    (0..params.ensemble_size)
        .map(|k| run_trial(x, noise_sd, params.seed, k, opts))
        .collect()
}

fn mode_of_sorted(sorted: &[usize]) -> usize {
    let mut best = (0, 0usize);
    let mut i = 0;
    while i < sorted.len() {
        let mut j = i;
        while j < sorted.len() && sorted[j] == sorted[i] {
            j += 1;
        }
        if j - i > best.1 {
            best = (sorted[i], j - i);
        }
        i = j;
    }
    best.0
}

/// Share of the signal captured by the first mode: `RMSE(x, x − IMF¹) / sd(x)`.
pub fn relative_rmse(dec: &ImfDecomposition) -> f64 {
    let sd = stats::std_dev(&dec.source);
    match dec.imfs.first() {
        Some(first) if sd > 0.0 => {
            let zeros = vec![0.0; first.len()];
            stats::rmse(first, &zeros) / sd
        }
        _ => 0.0,
    }
}

/// Criterion value for each candidate amplitude, in the given order.
pub fn noise_amplitude_scores(
    x: &[f64],
    candidates: &[f64],
    ensemble_size: usize,
    seed: u64,
    opts: &SiftOptions,
) -> Result<Vec<(f64, f64)>> {
    candidates
        .iter()
        .map(|&a| {
            let params = EemdParams {
                noise_amplitude: a,
                ensemble_size,
                seed,
            };
            eemd_with(x, &params, opts).map(|d| (a, relative_rmse(&d)))
        })
        .collect()
}

/// Candidate maximizing [`relative_rmse`]; ties go to the smaller amplitude.
pub fn select_noise_amplitude(x: &[f64], candidates: &[f64], ensemble_size: usize, seed: u64) -> Result<f64> {
    select_noise_amplitude_with(x, candidates, ensemble_size, seed, &SiftOptions::default())
}

pub fn select_noise_amplitude_with(
    x: &[f64],
    candidates: &[f64],
    ensemble_size: usize,
    seed: u64,
    opts: &SiftOptions,
) -> Result<f64> {
    if candidates.is_empty() {
        return Err(invalid!("no candidate noise amplitudes"));
    }
    let scores = noise_amplitude_scores(x, candidates, ensemble_size, seed, opts)?;
    let mut best = scores[0];
    for &(a, s) in &scores[1..] {
        if s > best.1 || (s == best.1 && a < best.0) {
            best = (a, s);
        }
    }
    Ok(best.0)
}

/// Long-run (smooth) and short-run (fluctuating) parts of a decomposed series.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SmoothSplit {
    /// Modes `split_index..=R` plus the residual.
    pub smooth: Vec<f64>,
    /// Modes `1..split_index`.
    pub fluctuating: Vec<f64>,
    pub split_index: usize,
    pub total_imfs: usize,
}

/// Partition at 1-based `split_index` in `1..=R+1`: `smooth` sums the modes from
/// `split_index` on plus the residual, `fluctuating` the modes before it.
pub fn split_smooth(dec: &ImfDecomposition, split_index: usize) -> Result<SmoothSplit> {
    let r = dec.n_imfs();
    if split_index < 1 || split_index > r + 1 {
        return Err(Error::SplitIndexOutOfRange {
            index: split_index,
            max: r + 1,
        });
    }
    let n = dec.len();
    let mut fluctuating = vec![0.0; n];
    for m in &dec.imfs[..split_index - 1] {
        for i in 0..n {
            fluctuating[i] += m[i];
        }
    }
    let mut smooth = dec.residual.clone();
    for m in dec.imfs[split_index - 1..].iter().rev() {
        for i in 0..n {
            smooth[i] += m[i];
        }
    }
    Ok(SmoothSplit {
        smooth,
        fluctuating,
        split_index,
        total_imfs: r,
    })
}

/// Exhaustive scan of `1..=R+1` minimizing `score`; ties go to the larger index.
pub fn select_split_index<F>(dec: &ImfDecomposition, mut score: F) -> Result<usize>
where
    F: FnMut(&SmoothSplit) -> Result<f64>,
{
    let mut best: Option<(usize, f64)> = None;
    for idx in 1..=dec.n_imfs() + 1 {
        let s = score(&split_smooth(dec, idx)?)?;
        match best {
            Some((_, b)) if s > b => {}
            _ => best = Some((idx, s)),
        }
    }
    Ok(best.map(|b| b.0).unwrap_or(1))
}
