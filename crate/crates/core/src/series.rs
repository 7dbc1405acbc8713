//! Annual time-series containers, alignment, lag embedding and scaling.

use alloc::borrow::ToOwned;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use crate::error::{invalid, Error, Result};
use crate::stats;

/// A named run of annual observations starting at `start`.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct TimeSeries {
    name: String,
    start: i32,
    values: Vec<f64>,
}

impl TimeSeries {
    pub fn new(name: impl Into<String>, start: i32, values: Vec<f64>) -> Result<Self> {
        let name = name.into();
        if values.len() < 2 {
            return Err(Error::InvalidSeries {
                name,
                reason: "fewer than 2 observations".to_string(),
            });
        }
        Self::checked(name, start, values)
    }

    fn checked(name: String, start: i32, values: Vec<f64>) -> Result<Self> {
        if let Some(pos) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidSeries {
                name,
                reason: alloc::format!("non-finite value at index {}", start + pos as i32),
            });
        }
        Ok(Self {
            name,
            start,
            values,
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn start(&self) -> i32 {
        self.start
    }

    /// Last index covered (inclusive).
    pub fn end(&self) -> i32 {
        self.start + self.values.len() as i32 - 1
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn get(&self, index: i32) -> Option<f64> {
        if index < self.start {
            return None;
        }
        self.values.get((index - self.start) as usize).copied()
    }

    /// Sub-window `[first, last]`; may be a single observation.
    fn window(&self, first: i32, last: i32) -> Self {
        let a = (first - self.start) as usize;
        let b = (last - self.start) as usize;
        Self {
            name: self.name.clone(),
            start: first,
            values: self.values[a..=b].to_vec(),
        }
    }
}

/// Series sharing one index range, with a designated target.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    series: Vec<TimeSeries>,
    first: i32,
    last: i32,
    target: String,
}

/// Restrict every series to the intersection of their ranges.
///
/// The first series becomes the target; use [`Dataset::with_target`] to change it.
pub fn align(series_list: Vec<TimeSeries>) -> Result<Dataset> {
    let Some(head) = series_list.first() else {
        return Err(invalid!("no series to align"));
    };
    let mut first = head.start();
    let mut last = head.end();
    for s in &series_list {
        first = first.max(s.start());
        last = last.min(s.end());
    }
    if first > last {
        // name the series whose range falls outside the others
        let culprit = series_list
            .iter()
            .find(|s| s.end() < first || s.start() > last)
            .unwrap_or(head);
        return Err(Error::Alignment {
            series: culprit.name().to_owned(),
        });
    }
    for (i, s) in series_list.iter().enumerate() {
        if series_list[..i].iter().any(|p| p.name() == s.name()) {
            return Err(invalid!("duplicate series name `{}`", s.name()));
        }
    }
    let target = head.name().to_owned();
    let series = series_list
        .iter()
        .map(|s| s.window(first, last))
        .collect();
    Ok(Dataset {
        series,
        first,
        last,
        target,
    })
}

impl Dataset {
    pub fn with_target(mut self, name: &str) -> Result<Self> {
        if self.get(name).is_none() {
            return Err(Error::MissingSeries(name.to_owned()));
        }
        self.target = name.to_owned();
        Ok(self)
    }

    pub fn series(&self) -> &[TimeSeries] {
        &self.series
    }

    pub fn get(&self, name: &str) -> Option<&TimeSeries> {
        self.series.iter().find(|s| s.name() == name)
    }

    /// Position of the named series in dataset order.
    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.series.iter().position(|s| s.name() == name)
    }

    pub fn require(&self, name: &str) -> Result<&TimeSeries> {
        self.get(name)
            .ok_or_else(|| Error::MissingSeries(name.to_owned()))
    }

    pub fn target_name(&self) -> &str {
        &self.target
    }

    pub fn target(&self) -> &TimeSeries {
        self.get(&self.target).expect("target present by construction")
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.series.iter().map(|s| s.name())
    }

    /// `(first, last)` inclusive index range.
    pub fn common_range(&self) -> (i32, i32) {
        (self.first, self.last)
    }

    pub fn first(&self) -> i32 {
        self.first
    }

    pub fn last(&self) -> i32 {
        self.last
    }

    pub fn len(&self) -> usize {
        (self.last - self.first + 1) as usize
    }

    pub fn is_empty(&self) -> bool {
        self.series.is_empty()
    }

    /// Position of `index` within the common range.
    pub fn position(&self, index: i32) -> Option<usize> {
        (self.first..=self.last)
            .contains(&index)
            .then(|| (index - self.first) as usize)
    }

    /// Restrict to `[first, last]` (inclusive, must lie inside the range).
    pub fn window(&self, first: i32, last: i32) -> Result<Self> {
        if first > last || first < self.first || last > self.last {
            return Err(invalid!(
                "window [{first}, {last}] outside [{}, {}]",
                self.first,
                self.last
            ));
        }
        Ok(Self {
            series: self.series.iter().map(|s| s.window(first, last)).collect(),
            first,
            last,
            target: self.target.clone(),
        })
    }

    /// Keep only the named series (target is always kept).
    pub fn select(&self, names: &[&str]) -> Result<Self> {
        let mut series = Vec::new();
        for s in &self.series {
            if s.name() == self.target || names.contains(&s.name()) {
                series.push(s.clone());
            }
        }
        for n in names {
            self.require(n)?;
        }
        Ok(Self {
            series,
            first: self.first,
            last: self.last,
            target: self.target.clone(),
        })
    }

    /// Dataset holding only the target series.
    pub fn target_only(&self) -> Self {
        Self {
            series: alloc::vec![self.target().clone()],
            first: self.first,
            last: self.last,
            target: self.target.clone(),
        }
    }

    /// Replace the values of one series (same length), returning a new dataset.
    pub fn map_series(&self, name: &str, f: impl Fn(f64) -> f64) -> Result<Self> {
        self.require(name)?;
        let series = self
            .series
            .iter()
            .map(|s| {
                if s.name() == name {
                    TimeSeries {
                        name: s.name.clone(),
                        start: s.start,
                        values: s.values.iter().map(|v| f(*v)).collect(),
                    }
                } else {
                    s.clone()
                }
            })
            .collect();
        Ok(Self {
            series,
            first: self.first,
            last: self.last,
            target: self.target.clone(),
        })
    }
}

/// Contiguous split with `floor(n * ratio)` in-sample points.
pub fn split_in_out(ds: &Dataset, ratio: f64) -> Result<(Dataset, Dataset)> {
    if !(ratio > 0.0 && ratio < 1.0) {
        return Err(invalid!("split ratio {ratio} outside (0, 1)"));
    }
    let n = ds.len();
    let n_in = libm::floor(n as f64 * ratio) as usize;
    split_at_count(ds, n_in)
}

/// Split so that the in-sample window ends at `last_in_sample` (inclusive).
///
/// With annual data 1890-2012 and `last_in_sample = 1988` this yields 99 in-sample
/// and 24 out-of-sample points, whereas a 0.8 ratio yields 98 / 25.
pub fn split_at_index(ds: &Dataset, last_in_sample: i32) -> Result<(Dataset, Dataset)> {
    let n_in = (last_in_sample - ds.first() + 1).max(0) as usize;
    split_at_count(ds, n_in.min(ds.len()))
}

fn split_at_count(ds: &Dataset, n_in: usize) -> Result<(Dataset, Dataset)> {
    let n_out = ds.len() - n_in;
    if n_in < 2 || n_out < 1 {
        return Err(Error::DegenerateSplit {
            in_sample: n_in,
            out_of_sample: n_out,
        });
    }
    let boundary = ds.first() + n_in as i32 - 1;
    Ok((
        ds.window(ds.first(), boundary)?,
        ds.window(boundary + 1, ds.last())?,
    ))
}

/// One design-matrix column: `variable` observed `lag` steps before the target.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Column {
    pub variable: String,
    pub lag: usize,
}

/// A variable and the lags (≥ 1, ascending) it contributes.
#[derive(Debug, Clone, Copy)]
pub struct LagInput<'a> {
    pub name: &'a str,
    pub values: &'a [f64],
    pub lags: &'a [usize],
}

/// Row-major design matrix of lagged regressors plus aligned response.
///
/// Row `r` is anchored at position `anchor(r)`: the last observation usable as an
/// input. Lag `l` of variable `v` is `v[anchor + 1 - l]` and the response is
/// `target[anchor + horizon]`.
#[derive(Debug, Clone, PartialEq)]
pub struct LagMatrix {
    columns: Vec<Column>,
    data: Vec<f64>,
    target: Vec<f64>,
    anchors: Vec<usize>,
    horizon: usize,
}

impl LagMatrix {
    /// Build from raw slices; every input and the target must share one length.
    pub fn build(inputs: &[LagInput<'_>], target: &[f64], horizon: usize) -> Result<Self> {
        Self::build_anchored(inputs, target, horizon, 0..usize::MAX)
    }

    /// As [`LagMatrix::build`], keeping only rows whose anchor lies in `anchors`
    /// (clipped to the anchors the lags and horizon allow).
    pub fn build_anchored(
        inputs: &[LagInput<'_>],
        target: &[f64],
        horizon: usize,
        anchors: core::ops::Range<usize>,
    ) -> Result<Self> {
        if horizon == 0 {
            return Err(invalid!("horizon must be at least 1"));
        }
        let n = target.len();
        let mut columns = Vec::new();
        let mut max_lag = 0;
        for input in inputs {
            if input.values.len() != n {
                return Err(Error::LengthMismatch {
                    left: input.values.len(),
                    right: n,
                });
            }
            let mut prev = 0;
            for &lag in input.lags {
                if lag == 0 || lag <= prev {
                    return Err(invalid!(
                        "lags for `{}` must be positive and strictly ascending",
                        input.name
                    ));
                }
                if lag >= n {
                    return Err(Error::LagTooLarge {
                        variable: input.name.to_owned(),
                        lag,
                        len: n,
                    });
                }
                prev = lag;
                columns.push(Column {
                    variable: input.name.to_owned(),
                    lag,
                });
            }
            max_lag = max_lag.max(prev);
        }
        if columns.is_empty() {
            return Err(invalid!("lag matrix has no columns"));
        }
        let start = anchors.start.max(max_lag - 1);
        let end = anchors.end.min(n.saturating_sub(horizon));
        let mut data = Vec::new();
        let mut tgt = Vec::new();
        let mut kept = Vec::new();
        for anchor in start..end {
            push_features(inputs, anchor, &mut data);
            tgt.push(target[anchor + horizon]);
            kept.push(anchor);
        }
        let anchors = kept;
        Ok(Self {
            columns,
            data,
            target: tgt,
            anchors,
            horizon,
        })
    }

    pub fn from_parts(
        columns: Vec<Column>,
        data: Vec<f64>,
        target: Vec<f64>,
    ) -> Result<Self> {
        let p = columns.len();
        if p == 0 || data.len() != p * target.len() {
            return Err(Error::DimensionMismatch {
                expected: p * target.len(),
                found: data.len(),
            });
        }
        let anchors = (0..target.len()).collect();
        Ok(Self {
            columns,
            data,
            target,
            anchors,
            horizon: 1,
        })
    }

    pub fn columns(&self) -> &[Column] {
        &self.columns
    }

    pub fn n_rows(&self) -> usize {
        self.target.len()
    }

    pub fn n_cols(&self) -> usize {
        self.columns.len()
    }

    pub fn row(&self, r: usize) -> &[f64] {
        let p = self.n_cols();
        &self.data[r * p..(r + 1) * p]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks_exact(self.n_cols())
    }

    pub fn column(&self, c: usize) -> Vec<f64> {
        self.rows().map(|r| r[c]).collect()
    }

    pub fn target(&self) -> &[f64] {
        &self.target
    }

    pub fn anchors(&self) -> &[usize] {
        &self.anchors
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    /// Rows `[start, end)`.
    pub fn slice_rows(&self, start: usize, end: usize) -> Self {
        let p = self.n_cols();
        Self {
            columns: self.columns.clone(),
            data: self.data[start * p..end * p].to_vec(),
            target: self.target[start..end].to_vec(),
            anchors: self.anchors[start..end].to_vec(),
            horizon: self.horizon,
        }
    }

    /// All rows except `[start, end)`.
    pub fn without_rows(&self, start: usize, end: usize) -> Self {
        let p = self.n_cols();
        let keep: Vec<usize> = (0..self.n_rows())
            .filter(|r| *r < start || *r >= end)
            .collect();
        let mut data = Vec::with_capacity(keep.len() * p);
        for &r in &keep {
            data.extend_from_slice(self.row(r));
        }
        Self {
            columns: self.columns.clone(),
            data,
            target: keep.iter().map(|&r| self.target[r]).collect(),
            anchors: keep.iter().map(|&r| self.anchors[r]).collect(),
            horizon: self.horizon,
        }
    }

    /// Keep the given column positions, in the given order.
    pub fn select_columns(&self, keep: &[usize]) -> Self {
        let mut data = Vec::with_capacity(keep.len() * self.n_rows());
        for row in self.rows() {
            data.extend(keep.iter().map(|&c| row[c]));
        }
        Self {
            columns: keep.iter().map(|&c| self.columns[c].clone()).collect(),
            data,
            target: self.target.clone(),
            anchors: self.anchors.clone(),
            horizon: self.horizon,
        }
    }

    pub fn with_target(&self, target: Vec<f64>) -> Result<Self> {
        if target.len() != self.n_rows() {
            return Err(Error::LengthMismatch {
                left: target.len(),
                right: self.n_rows(),
            });
        }
        Ok(Self {
            target,
            ..self.clone()
        })
    }
}

fn push_features(inputs: &[LagInput<'_>], anchor: usize, out: &mut Vec<f64>) {
    for input in inputs {
        for &lag in input.lags {
            out.push(input.values[anchor + 1 - lag]);
        }
    }
}

/// Feature vector anchored at position `anchor` (inputs up to and including it).
pub fn feature_row(inputs: &[LagInput<'_>], anchor: usize) -> Result<Vec<f64>> {
    for input in inputs {
        if let Some(&deepest) = input.lags.last() {
            if anchor + 1 < deepest || anchor >= input.values.len() {
                return Err(Error::InsufficientData {
                    needed: deepest,
                    available: (anchor + 1).min(input.values.len()),
                });
            }
        }
    }
    let mut out = Vec::new();
    push_features(inputs, anchor, &mut out);
    Ok(out)
}

/// Embed each dataset variable at lags `1..=max`, response = dataset target.
///
/// Variables with lag 0 are skipped; columns follow dataset order then ascending lag.
pub fn embed_lags(ds: &Dataset, lags_per_variable: &[(&str, usize)]) -> Result<LagMatrix> {
    for (name, _) in lags_per_variable {
        ds.require(name)?;
    }
    let lag_lists: Vec<(&TimeSeries, Vec<usize>)> = ds
        .series()
        .iter()
        .filter_map(|s| {
            lags_per_variable
                .iter()
                .find(|(n, _)| *n == s.name())
                .map(|(_, l)| (s, (1..=*l).collect()))
        })
        .collect();
    let inputs: Vec<LagInput<'_>> = lag_lists
        .iter()
        .map(|(s, lags)| LagInput {
            name: s.name(),
            values: s.values(),
            lags,
        })
        .collect();
    LagMatrix::build(&inputs, ds.target().values(), 1)
}

/// Per-column affine scaling fitted on one matrix and reusable on others.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Scaler {
    pub means: Vec<f64>,
    pub std_devs: Vec<f64>,
    /// Zero-variance columns, passed through untouched.
    pub constant: Vec<bool>,
}

impl Scaler {
    pub fn fit(m: &LagMatrix) -> Self {
        let mut means = Vec::with_capacity(m.n_cols());
        let mut std_devs = Vec::with_capacity(m.n_cols());
        let mut constant = Vec::with_capacity(m.n_cols());
        for c in 0..m.n_cols() {
            let col = m.column(c);
            let sd = stats::std_dev(&col);
            means.push(stats::mean(&col));
            std_devs.push(sd);
            constant.push(!(sd > 0.0));
        }
        Self {
            means,
            std_devs,
            constant,
        }
    }

    pub fn identity(p: usize) -> Self {
        Self {
            means: alloc::vec![0.0; p],
            std_devs: alloc::vec![1.0; p],
            constant: alloc::vec![false; p],
        }
    }

    pub fn transform_row(&self, row: &[f64]) -> Vec<f64> {
        row.iter()
            .enumerate()
            .map(|(c, v)| {
                if self.constant[c] {
                    *v
                } else {
                    (v - self.means[c]) / self.std_devs[c]
                }
            })
            .collect()
    }

    pub fn inverse_row(&self, row: &[f64]) -> Vec<f64> {
        row.iter()
            .enumerate()
            .map(|(c, v)| {
                if self.constant[c] {
                    *v
                } else {
                    v * self.std_devs[c] + self.means[c]
                }
            })
            .collect()
    }

    pub fn transform(&self, m: &LagMatrix) -> LagMatrix {
        let data = m.rows().flat_map(|r| self.transform_row(r)).collect();
        LagMatrix { data, ..m.clone() }
    }

    pub fn inverse(&self, m: &LagMatrix) -> LagMatrix {
        let data = m.rows().flat_map(|r| self.inverse_row(r)).collect();
        LagMatrix { data, ..m.clone() }
    }
}

/// Standardize columns to mean 0, sd 1 (population), returning the fitted scaler.
pub fn standardize(m: &LagMatrix) -> (LagMatrix, Scaler) {
    let scaler = Scaler::fit(m);
    (scaler.transform(m), scaler)
}

pub fn destandardize(m: &LagMatrix, scaler: &Scaler) -> LagMatrix {
    scaler.inverse(m)
}
