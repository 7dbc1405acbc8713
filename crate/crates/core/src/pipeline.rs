//! The decomposition hybrid: every series is split by EEMD into a smooth and a
//! fluctuating part, one support vector model is fitted per part of the target
//! (fed only with the matching part of the inputs), and the two forecasts are
//! summed.
//!
//! Multi-step forecasts are direct: horizon `h` has its own pair of models
//! trained on targets `h` steps ahead.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use crate::eemd::{self, ImfDecomposition, SiftOptions, DEFAULT_AMPLITUDES, DEFAULT_ENSEMBLE_SIZE};
use crate::elasticnet::{self, SelectionConfig};
use crate::error::{invalid, Error, Result};
use crate::metrics;
use crate::series::{standardize, Column, Dataset, LagInput, LagMatrix};
use crate::svr::{self, CvScoring, GridSpec, SvrConfig, SvrModel};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "kebab-case"))]
pub enum Variant {
    /// Own lags of the target's parts only.
    Ar,
    /// Elastic-net selection over lags of every series' matching part.
    En,
}

impl Variant {
    pub fn label(self) -> &'static str {
        match self {
            Variant::Ar => "EEMD-AR-SVR",
            Variant::En => "EEMD-EN-SVR",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "kebab-case"))]
pub enum SplitRule {
    /// 1-based index of the first mode counted as smooth.
    Fixed(usize),
    /// Minimize the in-sample one-step MAPE of the whole hybrid.
    InSample,
    /// Minimize one-step MAPE over the trailing `fraction` of the training
    /// window, forecasting it as the backtest would (models fitted on the
    /// rest, decomposition per the mode in use).
    Holdout(f64),
}

/// Which data the decomposition sees during evaluation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "kebab-case"))]
pub enum DecompositionMode {
    /// Decompose the whole sample once. Components at an origin then depend on
    /// later observations, so out-of-sample scores are optimistic.
    FullSample,
    /// Re-decompose the data available at each forecast origin.
    #[default]
    RecursiveOrigin,
}

impl DecompositionMode {
    pub fn label(self) -> &'static str {
        match self {
            DecompositionMode::FullSample => "full-sample",
            DecompositionMode::RecursiveOrigin => "recursive-origin",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Part {
    Smooth,
    Fluctuating,
}

impl Part {
    pub fn label(self) -> &'static str {
        match self {
            Part::Smooth => "smooth",
            Part::Fluctuating => "fluctuating",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct PipelineConfig {
    pub variant: Variant,
    pub fluct_lags: usize,
    pub smooth_lags: usize,
    pub candidate_max_lag: usize,
    pub split: SplitRule,
    pub amplitudes: Vec<f64>,
    pub ensemble_size: usize,
    pub seed: u64,
    pub grid: GridSpec,
    pub folds: usize,
    pub selection: SelectionConfig,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            variant: Variant::Ar,
            fluct_lags: 2,
            smooth_lags: 6,
            candidate_max_lag: 6,
            split: SplitRule::Holdout(0.2),
            amplitudes: DEFAULT_AMPLITUDES.to_vec(),
            ensemble_size: DEFAULT_ENSEMBLE_SIZE,
            seed: 0,
            grid: GridSpec::full(),
            folds: 4,
            selection: SelectionConfig::default(),
        }
    }
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<()> {
        if self.fluct_lags == 0 || self.smooth_lags == 0 || self.candidate_max_lag == 0 {
            return Err(invalid!("lag counts must be at least 1"));
        }
        if self.amplitudes.is_empty() {
            return Err(invalid!("no candidate noise amplitudes"));
        }
        if self.ensemble_size == 0 {
            return Err(invalid!("ensemble size must be at least 1"));
        }
        match self.split {
            SplitRule::Fixed(0) => return Err(invalid!("split index is 1-based")),
            SplitRule::Holdout(f) if !(f > 0.0 && f < 1.0) => {
                return Err(invalid!("holdout fraction must lie in (0, 1)"))
            }
            _ => {}
        }
        Ok(())
    }

    /// Deepest lag any part may use, fixing the first usable anchor.
    pub fn max_lag(&self) -> usize {
        let own = self.fluct_lags.max(self.smooth_lags);
        match self.variant {
            Variant::Ar => own,
            Variant::En => own.max(self.candidate_max_lag),
        }
    }
}

/// Per-series noise seed: the run seed mixed with the series name, so a
/// series gets the same noise whatever else is in the panel.
pub fn series_seed(seed: u64, name: &str) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in name.bytes() {
        h ^= b as u64;
        h = h.wrapping_mul(0x0100_0000_01b3);
    }
    let mut z = seed ^ h;
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Smooth and fluctuating parts of one series over one window.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SeriesParts {
    pub name: String,
    pub raw: Vec<f64>,
    pub smooth: Vec<f64>,
    pub fluctuating: Vec<f64>,
    pub split_index: usize,
    pub total_imfs: usize,
    pub noise_amplitude: f64,
}

impl SeriesParts {
    pub fn part(&self, part: Part) -> &[f64] {
        match part {
            Part::Smooth => &self.smooth,
            Part::Fluctuating => &self.fluctuating,
        }
    }
}

/// Decomposed series of one window; the target comes first.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Panel {
    pub first: i32,
    pub series: Vec<SeriesParts>,
}

impl Panel {
    pub fn target(&self) -> &SeriesParts {
        &self.series[0]
    }

    pub fn len(&self) -> usize {
        self.series[0].raw.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn index_of(&self, name: &str) -> Result<usize> {
        self.series
            .iter()
            .position(|s| s.name == name)
            .ok_or_else(|| Error::MissingSeries(name.into()))
    }
}

/// Series the variant needs, target first.
fn used_series(ds: &Dataset, variant: Variant) -> Vec<&crate::series::TimeSeries> {
    let mut out = vec![ds.target()];
    if variant == Variant::En {
        out.extend(ds.series().iter().filter(|s| s.name() != ds.target_name()));
    }
    out
}

/// Raw decompositions of the used series, before splitting.
#[derive(Debug, Clone)]
pub struct Decomposed {
    pub first: i32,
    pub names: Vec<String>,
    pub decompositions: Vec<ImfDecomposition>,
}

impl Decomposed {
    /// Split every series: the target at `target_split`, the others at the same
    /// index clamped to their own mode count.
    pub fn panel(&self, target_split: usize) -> Result<Panel> {
        let series = self
            .names
            .iter()
            .zip(&self.decompositions)
            .map(|(name, dec)| {
                let idx = target_split.min(dec.n_imfs() + 1);
                let s = eemd::split_smooth(dec, idx)?;
                Ok(SeriesParts {
                    name: name.clone(),
                    raw: dec.source.clone(),
                    smooth: s.smooth,
                    fluctuating: s.fluctuating,
                    split_index: idx,
                    total_imfs: dec.n_imfs(),
                    noise_amplitude: dec.noise_amplitude,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Panel {
            first: self.first,
            series,
        })
    }

    pub fn target_imfs(&self) -> usize {
        self.decompositions[0].n_imfs()
    }
}

/// EEMD of every used series of `ds` with the given per-series amplitudes.
pub fn decompose(ds: &Dataset, cfg: &PipelineConfig, amplitudes: &[(String, f64)]) -> Result<Decomposed> {
    let used = used_series(ds, cfg.variant);
    let jobs: Vec<(&str, &[f64], f64)> = used
        .iter()
        .map(|s| {
            let a = amplitudes
                .iter()
                .find(|(n, _)| n == s.name())
                .map(|(_, a)| *a)
                .ok_or_else(|| Error::MissingSeries(s.name().into()))?;
            Ok((s.name(), s.values(), a))
        })
        .collect::<Result<Vec<_>>>()?;
    let decompositions = crate::par::try_map(&jobs, |(name, values, a)| {
        let params = eemd::EemdParams {
            noise_amplitude: *a,
            ensemble_size: cfg.ensemble_size,
            seed: series_seed(cfg.seed, name),
        };
        eemd::eemd_with(values, &params, &SiftOptions::default())
    })?;
    Ok(Decomposed {
        first: ds.first(),
        names: jobs.iter().map(|j| String::from(j.0)).collect(),
        decompositions,
    })
}

/// Noise amplitude per used series, chosen on `ds` by the first-mode energy rule.
pub fn choose_amplitudes(ds: &Dataset, cfg: &PipelineConfig) -> Result<Vec<(String, f64)>> {
    let used = used_series(ds, cfg.variant);
    let chosen = crate::par::try_map(&used, |s| {
        eemd::select_noise_amplitude(
            s.values(),
            &cfg.amplitudes,
            cfg.ensemble_size,
            series_seed(cfg.seed, s.name()),
        )
    })?;
    Ok(used
        .iter()
        .zip(chosen)
        .map(|(s, a)| (String::from(s.name()), a))
        .collect())
}

/// Inputs of one part model: `(series, lags)` pairs in panel order.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct InputSpec {
    pub variables: Vec<(String, Vec<usize>)>,
    /// Elastic net kept nothing and the target's own first lag was used.
    pub fallback: bool,
    pub lambda: Option<f64>,
}

impl InputSpec {
    pub fn own_lags(target: &str, lags: usize) -> Self {
        Self {
            variables: vec![(target.into(), (1..=lags).collect())],
            fallback: false,
            lambda: None,
        }
    }

    pub fn columns(&self) -> Vec<Column> {
        self.variables
            .iter()
            .flat_map(|(v, lags)| {
                lags.iter().map(move |&lag| Column {
                    variable: v.clone(),
                    lag,
                })
            })
            .collect()
    }

    fn lag_inputs<'a>(&'a self, panel: &'a Panel, part: Part) -> Result<Vec<LagInput<'a>>> {
        self.variables
            .iter()
            .map(|(v, lags)| {
                let s = &panel.series[panel.index_of(v)?];
                Ok(LagInput {
                    name: v,
                    values: s.part(part),
                    lags,
                })
            })
            .collect()
    }
}

/// Rows with anchors in `[first_anchor, end − horizon)`; the response is the
/// target's `part` `horizon` steps after the anchor.
fn design(
    panel: &Panel,
    part: Part,
    inputs: &InputSpec,
    horizon: usize,
    first_anchor: usize,
    end: usize,
) -> Result<LagMatrix> {
    let lag_inputs = inputs.lag_inputs(panel, part)?;
    let target = &panel.target().part(part)[..end];
    let trimmed: Vec<LagInput<'_>> = lag_inputs
        .iter()
        .map(|l| LagInput {
            values: &l.values[..end],
            ..*l
        })
        .collect();
    LagMatrix::build_anchored(&trimmed, target, horizon, first_anchor..end)
}

/// Raw target at each row's response position, the denominator for CV scoring.
fn raw_targets(panel: &Panel, m: &LagMatrix) -> Vec<f64> {
    let raw = &panel.target().raw;
    m.anchors().iter().map(|a| raw[a + m.horizon()]).collect()
}

/// One fitted part model.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct PartModel {
    pub inputs: InputSpec,
    pub config: SvrConfig,
    pub cv_score: f64,
    pub svr: SvrModel,
}

impl PartModel {
    fn predict(&self, panel: &Panel, part: Part, anchor: usize) -> Result<f64> {
        let lag_inputs = self.inputs.lag_inputs(panel, part)?;
        let row = crate::series::feature_row(&lag_inputs, anchor)?;
        self.svr.predict(&row)
    }

    /// Same inputs and hyperparameters, coefficients refitted on `panel[..end]`.
    fn refit(&self, panel: &Panel, part: Part, horizon: usize, first_anchor: usize, end: usize) -> Result<Self> {
        let m = design(panel, part, &self.inputs, horizon, first_anchor, end)?;
        Ok(Self {
            svr: svr::train(&m, &self.config)?,
            ..self.clone()
        })
    }
}

fn select_inputs(
    panel: &Panel,
    part: Part,
    cfg: &PipelineConfig,
    horizon: usize,
    first_anchor: usize,
    end: usize,
) -> Result<InputSpec> {
    let target = panel.target().name.clone();
    let own = match (cfg.variant, part) {
        (Variant::Ar, Part::Smooth) => return Ok(InputSpec::own_lags(&target, cfg.smooth_lags)),
        (Variant::Ar, Part::Fluctuating) => return Ok(InputSpec::own_lags(&target, cfg.fluct_lags)),
        _ => cfg.candidate_max_lag,
    };
    let pool = InputSpec {
        variables: panel
            .series
            .iter()
            .map(|s| (s.name.clone(), (1..=own).collect()))
            .collect(),
        fallback: false,
        lambda: None,
    };
    let m = design(panel, part, &pool, horizon, first_anchor, end)?;
    let (scaled, _) = standardize(&m);
    let sel = elasticnet::select_variables(&scaled, &cfg.selection)?;
    if sel.is_empty() {
        return Ok(InputSpec {
            variables: vec![(target, vec![1])],
            fallback: true,
            lambda: Some(sel.lambda),
        });
    }
    let columns = m.columns();
    let mut variables: Vec<(String, Vec<usize>)> = Vec::new();
    for &j in &sel.indices {
        let c = &columns[j];
        match variables.iter_mut().find(|(v, _)| *v == c.variable) {
            Some((_, lags)) => lags.push(c.lag),
            None => variables.push((c.variable.clone(), vec![c.lag])),
        }
    }
    Ok(InputSpec {
        variables,
        fallback: false,
        lambda: Some(sel.lambda),
    })
}

fn fit_part(
    panel: &Panel,
    part: Part,
    cfg: &PipelineConfig,
    grid: &[SvrConfig],
    horizon: usize,
    first_anchor: usize,
    end: usize,
) -> Result<PartModel> {
    let inputs = select_inputs(panel, part, cfg, horizon, first_anchor, end)?;
    let m = design(panel, part, &inputs, horizon, first_anchor, end)?;
    let denom = raw_targets(panel, &m);
    let search = svr::grid_search(&m, grid, cfg.folds, CvScoring::RelativeTo(&denom))?;
    Ok(PartModel {
        svr: svr::train(&m, &search.best)?,
        inputs,
        config: search.best,
        cv_score: search.best_score,
    })
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct HorizonModel {
    pub horizon: usize,
    pub smooth: PartModel,
    pub fluctuating: PartModel,
}

impl HorizonModel {
    /// `(smooth, fluctuating)` forecasts for `anchor + horizon`.
    pub fn predict_parts(&self, panel: &Panel, anchor: usize) -> Result<(f64, f64)> {
        Ok((
            self.smooth.predict(panel, Part::Smooth, anchor)?,
            self.fluctuating.predict(panel, Part::Fluctuating, anchor)?,
        ))
    }

    fn refit(&self, panel: &Panel, first_anchor: usize, end: usize) -> Result<Self> {
        Ok(Self {
            horizon: self.horizon,
            smooth: self.smooth.refit(panel, Part::Smooth, self.horizon, first_anchor, end)?,
            fluctuating: self
                .fluctuating
                .refit(panel, Part::Fluctuating, self.horizon, first_anchor, end)?,
        })
    }
}

/// Summed forecast and its parts.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct PartForecast {
    pub smooth: f64,
    pub fluctuating: f64,
    pub total: f64,
}

impl PartForecast {
    fn new(smooth: f64, fluctuating: f64) -> Self {
        Self {
            smooth,
            fluctuating,
            total: smooth + fluctuating,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct HybridModel {
    pub variant: Variant,
    pub target: String,
    pub amplitudes: Vec<(String, f64)>,
    pub split_index: usize,
    pub target_imfs: usize,
    /// `(split index, selection score)` for every candidate when chosen automatically.
    pub split_scores: Vec<(usize, f64)>,
    pub first_anchor: usize,
    pub ensemble_size: usize,
    pub seed: u64,
    pub horizons: Vec<HorizonModel>,
}

impl HybridModel {
    pub fn horizon(&self, h: usize) -> Result<&HorizonModel> {
        self.horizons
            .iter()
            .find(|m| m.horizon == h)
            .ok_or_else(|| invalid!("no model for horizon {h}"))
    }

    /// Forecast `anchor + h` from the parts in `panel`.
    pub fn predict(&self, panel: &Panel, anchor: usize, h: usize) -> Result<PartForecast> {
        let (s, f) = self.horizon(h)?.predict_parts(panel, anchor)?;
        Ok(PartForecast::new(s, f))
    }

    /// Split a fresh decomposition with the frozen split rule.
    pub fn panel_of(&self, decomposed: &Decomposed) -> Result<Panel> {
        decomposed.panel(self.split_index)
    }

    /// Re-decompose `history` with the frozen choices and forecast `h` steps
    /// past its last observation.
    pub fn forecast(&self, history: &Dataset, cfg: &PipelineConfig, h: usize) -> Result<PartForecast> {
        let decomposed = decompose(history, &self.frozen_config(cfg), &self.amplitudes)?;
        let panel = self.panel_of(&decomposed)?;
        self.predict(&panel, panel.len() - 1, h)
    }

    /// In-sample fitted values `(anchor, forecast)` for horizon `h` over `panel[..end]`.
    pub fn fitted(&self, panel: &Panel, h: usize, end: usize) -> Result<Vec<(usize, PartForecast)>> {
        let model = self.horizon(h)?;
        (self.first_anchor..end.saturating_sub(h))
            .map(|a| {
                let (s, f) = model.predict_parts(panel, a)?;
                Ok((a, PartForecast::new(s, f)))
            })
            .collect()
    }

    /// Coefficients refitted on `panel[..end]`, every choice kept.
    pub fn refit(&self, panel: &Panel, end: usize) -> Result<Self> {
        let horizons = crate::par::try_map(&self.horizons, |m| m.refit(panel, self.first_anchor, end))?;
        Ok(Self {
            horizons,
            ..self.clone()
        })
    }

    /// `cfg` with the variant, ensemble size and seed this model was built with.
    pub fn frozen_config(&self, cfg: &PipelineConfig) -> PipelineConfig {
        PipelineConfig {
            variant: self.variant,
            ensemble_size: self.ensemble_size,
            seed: self.seed,
            ..cfg.clone()
        }
    }
}

/// In-sample one-step MAPE of the sum of the part models.
fn in_sample_mape(panel: &Panel, h: &HorizonModel, first_anchor: usize, end: usize) -> Result<f64> {
    let raw = &panel.target().raw;
    let mut actual = Vec::new();
    let mut fitted = Vec::new();
    for a in first_anchor..end - h.horizon {
        let (s, f) = h.predict_parts(panel, a)?;
        actual.push(raw[a + h.horizon]);
        fitted.push(s + f);
    }
    metrics::mape(&actual, &fitted)
}

fn fit_horizon(
    panel: &Panel,
    cfg: &PipelineConfig,
    grid: &[SvrConfig],
    horizon: usize,
    first_anchor: usize,
    end: usize,
) -> Result<HorizonModel> {
    Ok(HorizonModel {
        horizon,
        smooth: fit_part(panel, Part::Smooth, cfg, grid, horizon, first_anchor, end)?,
        fluctuating: fit_part(panel, Part::Fluctuating, cfg, grid, horizon, first_anchor, end)?,
    })
}

/// Result of [`build`]: the model and the panel it was trained on.
#[derive(Debug, Clone)]
pub struct Built {
    pub model: HybridModel,
    pub decomposed: Decomposed,
    pub panel: Panel,
}

fn leading(ds: &Dataset, len: usize) -> Result<Dataset> {
    ds.window(ds.first(), ds.first() + len as i32 - 1)
}

/// Fit the hybrid on the first `train_len` observations of `ds`.
///
/// In [`DecompositionMode::FullSample`] every series of `ds` is decomposed
/// whole and the training rows are read from that decomposition; otherwise
/// only the training window is decomposed.
pub fn build(
    ds: &Dataset,
    train_len: usize,
    cfg: &PipelineConfig,
    horizons: &[usize],
    mode: DecompositionMode,
) -> Result<Built> {
    cfg.validate()?;
    if horizons.is_empty() || horizons.contains(&0) {
        return Err(invalid!("horizons must be a nonempty list of positive steps"));
    }
    if train_len > ds.len() {
        return Err(invalid!("training length exceeds the data"));
    }
    if cfg.variant == Variant::En && ds.series().len() < 2 {
        return Err(invalid!(
            "the elastic-net variant needs predictor series besides `{}`",
            ds.target_name()
        ));
    }
    let first_anchor = cfg.max_lag() - 1;
    let deepest = horizons.iter().copied().max().unwrap_or(1);
    let needed = first_anchor + deepest + 2 * cfg.folds;
    if train_len < needed {
        return Err(Error::InsufficientData {
            needed,
            available: train_len,
        });
    }
    let train_window = leading(ds, train_len)?;
    let grid = cfg.grid.expand();
    if grid.is_empty() {
        return Err(Error::EmptyGrid);
    }
    let amplitudes = choose_amplitudes(&train_window, cfg)?;
    let source = match mode {
        DecompositionMode::FullSample => ds,
        DecompositionMode::RecursiveOrigin => &train_window,
    };
    let decomposed = decompose(source, cfg, &amplitudes)?;
    let candidates: Vec<usize> = (1..=decomposed.target_imfs() + 1).collect();
    let target_dec = &decomposed.decompositions[0];

    let mut split_scores = Vec::new();
    let split_index = match cfg.split {
        SplitRule::Fixed(i) => i.min(decomposed.target_imfs() + 1),
        SplitRule::InSample => {
            let scores = crate::par::try_map(&candidates, |&i| -> Result<f64> {
                let panel = decomposed.panel(i)?;
                let h1 = fit_horizon(&panel, cfg, &grid, 1, first_anchor, train_len)?;
                in_sample_mape(&panel, &h1, first_anchor, train_len)
            })?;
            split_scores = candidates.iter().copied().zip(scores.iter().copied()).collect();
            eemd::select_split_index(target_dec, |s| Ok(scores[s.split_index - 1]))?
        }
        SplitRule::Holdout(fraction) => {
            let held = ((train_len as f64 * fraction).round() as usize).max(2);
            let inner = train_len.saturating_sub(held);
            if inner < needed {
                return Err(Error::InsufficientData {
                    needed: needed + held,
                    available: train_len,
                });
            }
            let raw = train_window.target().values();
            let origin_list: Vec<usize> = (inner - 1..train_len - 1).collect();
            let inner_dec;
            let mut origins = Vec::new();
            let fit_on = match mode {
                DecompositionMode::FullSample => &decomposed,
                DecompositionMode::RecursiveOrigin => {
                    inner_dec = decompose(&leading(ds, inner)?, cfg, &amplitudes)?;
                    origins = crate::par::try_map(&origin_list, |&o| -> Result<Decomposed> {
                        decompose(&leading(ds, o + 1)?, cfg, &amplitudes)
                    })?;
                    &inner_dec
                }
            };
            let scores = crate::par::try_map(&candidates, |&i| -> Result<f64> {
                let fit_panel = fit_on.panel(i)?;
                let h1 = fit_horizon(&fit_panel, cfg, &grid, 1, first_anchor, inner)?;
                let mut actual = Vec::with_capacity(origin_list.len());
                let mut fitted = Vec::with_capacity(origin_list.len());
                for (k, &o) in origin_list.iter().enumerate() {
                    let (s, f) = match origins.get(k) {
                        Some(d) => h1.predict_parts(&d.panel(i)?, o)?,
                        None => h1.predict_parts(&fit_panel, o)?,
                    };
                    actual.push(raw[o + 1]);
                    fitted.push(s + f);
                }
                metrics::mape(&actual, &fitted)
            })?;
            split_scores = candidates.iter().copied().zip(scores.iter().copied()).collect();
            eemd::select_split_index(target_dec, |s| Ok(scores[s.split_index - 1]))?
        }
    };
    let panel = decomposed.panel(split_index)?;
    let models = crate::par::try_map(horizons, |&h| {
        fit_horizon(&panel, cfg, &grid, h, first_anchor, train_len)
    })?;
    let model = HybridModel {
        variant: cfg.variant,
        target: ds.target_name().into(),
        amplitudes,
        split_index,
        target_imfs: decomposed.target_imfs(),
        split_scores,
        first_anchor,
        ensemble_size: cfg.ensemble_size,
        seed: cfg.seed,
        horizons: models,
    };
    Ok(Built {
        model,
        decomposed,
        panel,
    })
}
