//! Static multi-origin evaluation.
//!
//! Every model is set up once on the in-sample window (lag orders, priors,
//! hyperparameters, decomposition choices). It then forecasts `h` steps ahead
//! from each origin `t` in `[boundary, last − h]` using actuals up to `t`.
//! Coefficients are either kept from the in-sample fit or refitted on the
//! expanding window.

use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;

use crate::baselines::RwModel;
use crate::bvar::{self, BvarModel, PriorSpec};
use crate::error::{invalid, Error, Result};
use crate::metrics::{EvalReport, Sample};
use crate::pipeline::{self, Built, DecompositionMode, HybridModel, Panel, PipelineConfig};
use crate::series::Dataset;

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "kebab-case"))]
pub enum ModelSpec {
    RandomWalk,
    RandomWalkDrift,
    /// Bayesian autoregression on the target alone.
    Bar,
    /// Bayesian VAR over the whole panel.
    Bvar,
    Hybrid(PipelineConfig),
}

impl ModelSpec {
    pub fn label(&self) -> &'static str {
        match self {
            ModelSpec::RandomWalk => "RW",
            ModelSpec::RandomWalkDrift => "RW-drift",
            ModelSpec::Bar => "BAR",
            ModelSpec::Bvar => "BVAR",
            ModelSpec::Hybrid(cfg) => cfg.variant.label(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "kebab-case"))]
pub enum RefitPolicy {
    /// In-sample coefficients are used at every origin.
    Frozen,
    /// Coefficients are re-estimated on all data up to each origin.
    #[default]
    Expanding,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct BacktestSpec {
    pub models: Vec<ModelSpec>,
    /// Last in-sample index.
    pub boundary: i32,
    pub horizons: Vec<usize>,
    pub mode: DecompositionMode,
    pub refit: RefitPolicy,
    /// Observations before the first in-sample origin; every model's lags must fit.
    pub warmup: usize,
    /// Largest order the Schwarz criterion considers for BAR and BVAR.
    pub max_var_lag: usize,
    pub prior_grid: Vec<PriorSpec>,
}

impl BacktestSpec {
    pub fn new(models: Vec<ModelSpec>, boundary: i32) -> Self {
        Self {
            models,
            boundary,
            horizons: (1..=10).collect(),
            mode: DecompositionMode::default(),
            refit: RefitPolicy::default(),
            warmup: 6,
            max_var_lag: 6,
            prior_grid: bvar::default_prior_grid(),
        }
    }

    /// The six standard models, hybrids built from `hybrid`.
    pub fn all_models(hybrid: &PipelineConfig) -> Vec<ModelSpec> {
        vec![
            ModelSpec::RandomWalk,
            ModelSpec::RandomWalkDrift,
            ModelSpec::Bar,
            ModelSpec::Bvar,
            ModelSpec::Hybrid(PipelineConfig {
                variant: pipeline::Variant::Ar,
                ..hybrid.clone()
            }),
            ModelSpec::Hybrid(PipelineConfig {
                variant: pipeline::Variant::En,
                ..hybrid.clone()
            }),
        ]
    }

    pub fn validate(&self, ds: &Dataset) -> Result<()> {
        if self.boundary <= ds.first() || self.boundary >= ds.last() {
            return Err(invalid!(
                "boundary {} must lie strictly inside [{}, {}]",
                self.boundary,
                ds.first(),
                ds.last()
            ));
        }
        if self.horizons.is_empty() || self.horizons.contains(&0) {
            return Err(invalid!("horizons must be a nonempty list of positive steps"));
        }
        if self.warmup == 0 || self.max_var_lag == 0 {
            return Err(invalid!("warmup and lag limits must be at least 1"));
        }
        for (i, m) in self.models.iter().enumerate() {
            if self.models[..i].iter().any(|o| o.label() == m.label()) {
                return Err(invalid!("model `{}` listed twice", m.label()));
            }
        }
        Ok(())
    }
}

/// One out-of-sample forecast.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ForecastRecord {
    pub origin: i32,
    pub horizon: usize,
    pub model: String,
    pub forecast: f64,
    pub actual: f64,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ModelFailure {
    pub model: String,
    pub message: String,
}

/// Choices made on the in-sample window, as `(key, value)` text pairs.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ModelSummary {
    pub model: String,
    pub notes: Vec<(String, String)>,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct BacktestReport {
    /// Model-major, then in-sample before out-of-sample, then horizon.
    pub reports: Vec<EvalReport>,
    pub forecasts: Vec<ForecastRecord>,
    pub failures: Vec<ModelFailure>,
    pub summaries: Vec<ModelSummary>,
}

impl BacktestReport {
    pub fn get(&self, model: &str, sample: Sample, horizon: usize) -> Option<&EvalReport> {
        self.reports
            .iter()
            .find(|r| r.model == model && r.sample == sample && r.horizon == horizon)
    }
}

enum Fitted {
    Rw { drift: bool, model: RwModel },
    Var { model: BvarModel, spec: PriorSpec, target_only: bool },
    Hybrid {
        cfg: PipelineConfig,
        built: Built,
        mode: DecompositionMode,
    },
}

struct Outcome {
    reports: Vec<EvalReport>,
    forecasts: Vec<ForecastRecord>,
    summary: ModelSummary,
}

/// Forecasts `(horizon, value)` from one origin.
type Path = Vec<(usize, f64)>;

fn fmt_f64(v: f64) -> String {
    alloc::format!("{v}")
}

fn prepare(model: &ModelSpec, spec: &BacktestSpec, train: &Dataset, ds: &Dataset) -> Result<(Fitted, Vec<(String, String)>)> {
    match model {
        ModelSpec::RandomWalk | ModelSpec::RandomWalkDrift => {
            let drift = matches!(model, ModelSpec::RandomWalkDrift);
            let m = RwModel::fit(train.target().values(), drift)?;
            Ok((
                Fitted::Rw { drift, model: m },
                vec![("drift".into(), fmt_f64(m.drift))],
            ))
        }
        ModelSpec::Bar | ModelSpec::Bvar => {
            let target_only = matches!(model, ModelSpec::Bar);
            let data = if target_only { train.target_only() } else { train.clone() };
            let max_lag = spec.max_var_lag.min(spec.warmup);
            let p = bvar::select_lag_sic(&data, max_lag)?;
            let grid = if target_only { univariate_grid(&spec.prior_grid) } else { spec.prior_grid.clone() };
            let search = bvar::tune_prior(&data, p, &grid)?;
            let fitted = bvar::fit_with_spec(&data, p, search.best)?;
            let notes = vec![
                ("lag_order".into(), p.to_string()),
                ("tightness".into(), fmt_f64(search.best.tightness)),
                ("decay".into(), fmt_f64(search.best.decay)),
                ("cross_weight".into(), fmt_f64(search.best.cross_weight)),
                ("in_sample_one_step_mape".into(), fmt_f64(search.best_score)),
            ];
            Ok((
                Fitted::Var {
                    model: fitted,
                    spec: search.best,
                    target_only,
                },
                notes,
            ))
        }
        ModelSpec::Hybrid(cfg) => {
            if cfg.max_lag() > spec.warmup {
                return Err(invalid!(
                    "{} needs {} warmup observations, the backtest allows {}",
                    cfg.variant.label(),
                    cfg.max_lag(),
                    spec.warmup
                ));
            }
            let built = pipeline::build(ds, train.len(), cfg, &spec.horizons, spec.mode)?;
            let notes = hybrid_notes(&built.model);
            Ok((
                Fitted::Hybrid {
                    cfg: cfg.clone(),
                    built,
                    mode: spec.mode,
                },
                notes,
            ))
        }
    }
}

/// Cross weights do not matter with one variable: keep the first entry per
/// `(tightness, decay)`.
fn univariate_grid(grid: &[PriorSpec]) -> Vec<PriorSpec> {
    let mut out: Vec<PriorSpec> = Vec::new();
    for g in grid {
        if !out.iter().any(|o| o.tightness == g.tightness && o.decay == g.decay) {
            out.push(*g);
        }
    }
    out
}

fn hybrid_notes(m: &HybridModel) -> Vec<(String, String)> {
    let mut notes = vec![
        ("split_index".into(), m.split_index.to_string()),
        ("target_imfs".into(), m.target_imfs.to_string()),
    ];
    if !m.split_scores.is_empty() {
        let scores: Vec<String> = m.split_scores.iter().map(|(i, v)| alloc::format!("{i}:{v}")).collect();
        notes.push(("split_scores".into(), scores.join(" ")));
    }
    for (name, a) in &m.amplitudes {
        notes.push((alloc::format!("noise_amplitude.{name}"), fmt_f64(*a)));
    }
    for h in &m.horizons {
        for (part, pm) in [("smooth", &h.smooth), ("fluctuating", &h.fluctuating)] {
            let c = &pm.config;
            notes.push((
                alloc::format!("h{}.{part}.svr", h.horizon),
                alloc::format!(
                    "{} C={} eps={} gamma={}",
                    c.kernel.kind.name(),
                    c.cost,
                    c.epsilon,
                    c.kernel.gamma
                ),
            ));
            let inputs: Vec<String> = pm
                .inputs
                .columns()
                .iter()
                .map(|col| alloc::format!("{}@{}", col.variable, col.lag))
                .collect();
            notes.push((alloc::format!("h{}.{part}.inputs", h.horizon), inputs.join(" ")));
        }
    }
    notes
}

fn columns_upto(ds: &Dataset, end: usize) -> Vec<&[f64]> {
    ds.series().iter().map(|s| &s.values()[..end]).collect()
}

/// Forecasts from position `origin` of `ds` for the horizons in `hs`.
fn forecast_path(fitted: &Fitted, ds: &Dataset, origin: usize, hs: &[usize], refit: bool, in_sample: bool) -> Result<Path> {
    let y = ds.target().values();
    match fitted {
        Fitted::Rw { drift, model } => {
            let m = if refit { RwModel::fit(&y[..=origin], *drift)? } else { *model };
            Ok(hs.iter().map(|&h| (h, m.forecast_from(y[origin], h))).collect())
        }
        Fitted::Var {
            model,
            spec,
            target_only,
        } => {
            let data = if *target_only { ds.target_only() } else { ds.clone() };
            let m = if refit {
                let window = data.window(data.first(), data.first() + origin as i32)?;
                bvar::fit_with_spec(&window, model.lag_order, *spec)?
            } else {
                model.clone()
            };
            let recent = columns_upto(&data, origin + 1);
            let deepest = hs.iter().copied().max().unwrap_or(0);
            let path = m.forecast_from(&recent, deepest)?;
            let target = m
                .variables
                .iter()
                .position(|v| v == ds.target_name())
                .ok_or_else(|| Error::MissingSeries(ds.target_name().into()))?;
            Ok(hs.iter().map(|&h| (h, path[h - 1][target])).collect())
        }
        Fitted::Hybrid { cfg, built, mode } => {
            let model = &built.model;
            let fresh;
            let panel: &Panel = if in_sample || *mode == DecompositionMode::FullSample {
                &built.panel
            } else {
                let window = ds.window(ds.first(), ds.first() + origin as i32)?;
                let dec = pipeline::decompose(&window, &model.frozen_config(cfg), &model.amplitudes)?;
                fresh = model.panel_of(&dec)?;
                &fresh
            };
            let refitted;
            let m = if refit {
                refitted = model.refit(panel, origin + 1)?;
                &refitted
            } else {
                model
            };
            hs.iter()
                .map(|&h| Ok((h, m.predict(panel, origin, h)?.total)))
                .collect()
        }
    }
}

fn evaluate(model: &ModelSpec, spec: &BacktestSpec, ds: &Dataset) -> Result<Outcome> {
    let label = model.label();
    let train = ds.window(ds.first(), spec.boundary)?;
    let n_in = train.len();
    let n = ds.len();
    let (fitted, notes) = prepare(model, spec, &train, ds)?;
    let years = |pos: usize| ds.first() + pos as i32;
    let y = ds.target().values();

    let first_origin = spec.warmup - 1;
    let in_origins: Vec<usize> = (first_origin..n_in - 1).collect();
    let in_paths = crate::par::try_map(&in_origins, |&o| {
        let hs: Vec<usize> = spec.horizons.iter().copied().filter(|h| o + h < n_in).collect();
        forecast_path(&fitted, &train, o, &hs, false, true)
    })?;
    let out_origins: Vec<usize> = (n_in - 1..n - 1).collect();
    let refit = spec.refit == RefitPolicy::Expanding;
    let out_paths = crate::par::try_map(&out_origins, |&o| {
        let hs: Vec<usize> = spec.horizons.iter().copied().filter(|h| o + h < n).collect();
        forecast_path(&fitted, ds, o, &hs, refit, false)
    })?;

    let mut reports = Vec::new();
    let mut forecasts = Vec::new();
    for (sample, origins, paths) in [
        (Sample::InSample, &in_origins, &in_paths),
        (Sample::OutOfSample, &out_origins, &out_paths),
    ] {
        for &h in &spec.horizons {
            let mut targets = Vec::new();
            let mut actual = Vec::new();
            let mut forecast = Vec::new();
            for (o, path) in origins.iter().zip(paths.iter()) {
                if let Some((_, f)) = path.iter().find(|(ph, _)| *ph == h) {
                    targets.push(years(o + h));
                    actual.push(y[o + h]);
                    forecast.push(*f);
                    if sample == Sample::OutOfSample {
                        forecasts.push(ForecastRecord {
                            origin: years(*o),
                            horizon: h,
                            model: label.into(),
                            forecast: *f,
                            actual: y[o + h],
                        });
                    }
                }
            }
            if actual.len() >= 2 {
                reports.push(EvalReport::new(label, h, sample, targets, actual, forecast)?);
            }
        }
    }
    Ok(Outcome {
        reports,
        forecasts,
        summary: ModelSummary {
            model: label.into(),
            notes,
        },
    })
}

/// Evaluate every model in `spec` on `ds`. A model that fails is listed in
/// `failures` and contributes no rows.
pub fn run(spec: &BacktestSpec, ds: &Dataset) -> Result<BacktestReport> {
    spec.validate(ds)?;
    let outcomes = crate::par::map(&spec.models, |m| evaluate(m, spec, ds));
    let mut report = BacktestReport {
        reports: Vec::new(),
        forecasts: Vec::new(),
        failures: Vec::new(),
        summaries: Vec::new(),
    };
    for (m, outcome) in spec.models.iter().zip(outcomes) {
        match outcome {
            Ok(o) => {
                report.reports.extend(o.reports);
                report.forecasts.extend(o.forecasts);
                report.summaries.push(o.summary);
            }
            Err(e) => report.failures.push(ModelFailure {
                model: m.label().into(),
                message: e.to_string(),
            }),
        }
    }
    Ok(report)
}
