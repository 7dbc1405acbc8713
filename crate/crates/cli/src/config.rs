//! The declarative run configuration (TOML).
//!
//! Every key is optional; see the README for the full reference.

use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use serde::{Deserialize, Serialize};

use hybridcast_core::backtest::{BacktestSpec, ModelSpec, RefitPolicy};
use hybridcast_core::bvar::{self, PriorSpec};
use hybridcast_core::eemd::{DEFAULT_AMPLITUDES, DEFAULT_ENSEMBLE_SIZE};
use hybridcast_core::elasticnet::SelectionConfig;
use hybridcast_core::pipeline::{DecompositionMode, PipelineConfig, SplitRule, Variant};
use hybridcast_core::svr::GridSpec;
use hybridcast_core::Dataset;

pub const SEED_ENV: &str = "HYBRIDCAST_SEED";

pub const MODEL_LABELS: [&str; 6] = ["RW", "RW-drift", "BAR", "BVAR", "EEMD-AR-SVR", "EEMD-EN-SVR"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub data: Option<PathBuf>,
    pub target: String,
    pub seed: Option<u64>,
    /// Last in-sample year; overrides `split_ratio`.
    pub boundary: Option<i32>,
    pub split_ratio: f64,
    pub horizons: Vec<usize>,
    pub models: Vec<String>,
    pub mode: DecompositionMode,
    pub refit: RefitPolicy,
    pub warmup: usize,
    pub hybrid: HybridConfig,
    pub bvar: BvarConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            data: None,
            target: crate::dataio::TARGET.into(),
            seed: None,
            boundary: None,
            split_ratio: 0.8,
            horizons: (1..=10).collect(),
            models: MODEL_LABELS.iter().map(|s| s.to_string()).collect(),
            mode: DecompositionMode::default(),
            refit: RefitPolicy::default(),
            warmup: 6,
            hybrid: HybridConfig::default(),
            bvar: BvarConfig::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GridChoice {
    Full,
    Compact,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HybridConfig {
    pub fluct_lags: usize,
    pub smooth_lags: usize,
    pub candidate_max_lag: usize,
    /// `"holdout"`, `"in-sample"` or a fixed 1-based index.
    pub split: SplitSetting,
    pub holdout_fraction: f64,
    pub amplitudes: Vec<f64>,
    pub ensemble_size: usize,
    pub grid: GridChoice,
    /// Explicit grid; replaces `grid` when present.
    pub custom_grid: Option<GridSpec>,
    pub folds: usize,
    pub en_alpha: f64,
    pub en_path_len: usize,
    pub en_min_ratio: f64,
}

impl Default for HybridConfig {
    fn default() -> Self {
        let sel = SelectionConfig::default();
        Self {
            fluct_lags: 2,
            smooth_lags: 6,
            candidate_max_lag: 6,
            split: SplitSetting::Rule(SplitName::Holdout),
            holdout_fraction: 0.2,
            amplitudes: DEFAULT_AMPLITUDES.to_vec(),
            ensemble_size: DEFAULT_ENSEMBLE_SIZE,
            grid: GridChoice::Full,
            custom_grid: None,
            folds: 4,
            en_alpha: sel.alpha,
            en_path_len: sel.path_len,
            en_min_ratio: sel.min_ratio,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum SplitSetting {
    Fixed(usize),
    Rule(SplitName),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SplitName {
    Holdout,
    InSample,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BvarConfig {
    pub max_lag: usize,
    /// `[tightness, decay, cross_weight]` triples; the default grid when empty.
    pub priors: Vec<[f64; 3]>,
}

impl Default for BvarConfig {
    fn default() -> Self {
        Self {
            max_lag: 6,
            priors: Vec::new(),
        }
    }
}

impl RunConfig {
    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        let mut cfg: RunConfig = toml::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
        // relative data paths are relative to the config file
        if let (Some(data), Some(dir)) = (&cfg.data, path.parent()) {
            if data.is_relative() {
                cfg.data = Some(dir.join(data));
            }
        }
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// Seed precedence: explicit flag, then the config file, then the
    /// environment, then 0.
    pub fn resolve_seed(&mut self, flag: Option<u64>) -> Result<u64> {
        let seed = match (flag, self.seed) {
            (Some(s), _) | (None, Some(s)) => s,
            (None, None) => match std::env::var(SEED_ENV) {
                Ok(v) => v
                    .trim()
                    .parse()
                    .map_err(|_| anyhow!("{SEED_ENV}=`{v}` is not an unsigned integer"))?,
                Err(_) => 0,
            },
        };
        self.seed = Some(seed);
        Ok(seed)
    }

    pub fn seed(&self) -> u64 {
        self.seed.unwrap_or(0)
    }

    pub fn grid(&self) -> GridSpec {
        match (&self.hybrid.custom_grid, self.hybrid.grid) {
            (Some(g), _) => g.clone(),
            (None, GridChoice::Full) => GridSpec::full(),
            (None, GridChoice::Compact) => GridSpec::compact(),
        }
    }

    pub fn pipeline(&self, variant: Variant) -> PipelineConfig {
        let h = &self.hybrid;
        let split = match h.split {
            SplitSetting::Fixed(i) => SplitRule::Fixed(i),
            SplitSetting::Rule(SplitName::Holdout) => SplitRule::Holdout(h.holdout_fraction),
            SplitSetting::Rule(SplitName::InSample) => SplitRule::InSample,
        };
        PipelineConfig {
            variant,
            fluct_lags: h.fluct_lags,
            smooth_lags: h.smooth_lags,
            candidate_max_lag: h.candidate_max_lag,
            split,
            amplitudes: h.amplitudes.clone(),
            ensemble_size: h.ensemble_size,
            seed: self.seed(),
            grid: self.grid(),
            folds: h.folds,
            selection: SelectionConfig {
                alpha: h.en_alpha,
                path_len: h.en_path_len,
                min_ratio: h.en_min_ratio,
                folds: h.folds,
            },
        }
    }

    pub fn prior_grid(&self) -> Vec<PriorSpec> {
        if self.bvar.priors.is_empty() {
            bvar::default_prior_grid()
        } else {
            self.bvar.priors.iter().map(|[q, d, k]| PriorSpec::new(*q, *d, *k)).collect()
        }
    }

    pub fn model_specs(&self) -> Result<Vec<ModelSpec>> {
        self.models
            .iter()
            .map(|label| {
                Ok(match label.as_str() {
                    "RW" => ModelSpec::RandomWalk,
                    "RW-drift" => ModelSpec::RandomWalkDrift,
                    "BAR" => ModelSpec::Bar,
                    "BVAR" => ModelSpec::Bvar,
                    "EEMD-AR-SVR" => ModelSpec::Hybrid(self.pipeline(Variant::Ar)),
                    "EEMD-EN-SVR" => ModelSpec::Hybrid(self.pipeline(Variant::En)),
                    other => bail!("unknown model `{other}`; expected one of {}", MODEL_LABELS.join(", ")),
                })
            })
            .collect()
    }

    /// Last in-sample year: the explicit boundary, else `floor(n · split_ratio)`
    /// observations.
    pub fn boundary_for(&self, ds: &Dataset) -> Result<i32> {
        if let Some(b) = self.boundary {
            return Ok(b);
        }
        if !(self.split_ratio > 0.0 && self.split_ratio < 1.0) {
            bail!("split_ratio must lie in (0, 1), got {}", self.split_ratio);
        }
        let n_in = (ds.len() as f64 * self.split_ratio).floor() as i32;
        Ok(ds.first() + n_in - 1)
    }

    pub fn backtest_spec(&self, ds: &Dataset) -> Result<BacktestSpec> {
        Ok(BacktestSpec {
            models: self.model_specs()?,
            boundary: self.boundary_for(ds)?,
            horizons: self.horizons.clone(),
            mode: self.mode,
            refit: self.refit,
            warmup: self.warmup,
            max_var_lag: self.bvar.max_lag,
            prior_grid: self.prior_grid(),
        })
    }

    pub fn uses_variant(&self, variant: Variant) -> bool {
        self.models.iter().any(|m| m == variant.label())
    }
}
