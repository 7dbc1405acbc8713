//! Command-line front end.

use std::ffi::OsString;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use hybridcast_core::backtest::{self, RefitPolicy};
use hybridcast_core::bvar::{self, BvarModel, PriorSpec};
use hybridcast_core::eemd;
use hybridcast_core::fixture::{self, DEFAULT_LENGTH};
use hybridcast_core::pipeline::{self, series_seed, DecompositionMode, InputSpec, Variant};
use hybridcast_core::Dataset;

use crate::config::RunConfig;
use crate::dataio::{self, PanelSchema};
use crate::output::{self, DataRef, Manifest, RunDir};

pub const LEAKAGE_WARNING: &str = "full-sample decomposition reads the whole series \
     (including the evaluation window) before splitting; out-of-sample scores are optimistic";

#[derive(Debug, Parser)]
#[command(name = "hybridcast", version, about = "Decomposition-based forecasting of annual series")]
pub struct Cli {
    /// Run seed; overrides the config file and HYBRIDCAST_SEED.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// TOML run configuration.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Worker threads (0 = all cores). Results do not depend on it.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// EEMD of one series into IMF columns.
    Decompose(DecomposeArgs),
    /// Fit BVAR (or BAR with --target-only) on the in-sample window.
    FitBvar(FitBvarArgs),
    /// Train a hybrid model on the in-sample window.
    TrainHybrid(TrainArgs),
    /// Rolling-origin evaluation of the configured models.
    Backtest(BacktestArgs),
    /// Write the synthetic eleven-series panel.
    MakeFixture(FixtureArgs),
    /// Rebuild tables and plot data from a backtest directory.
    Report(ReportArgs),
}

#[derive(Debug, Args, Default)]
pub struct DataArgs {
    /// Panel CSV; overrides `data` in the config.
    #[arg(long)]
    pub data: Option<PathBuf>,
    /// Target column.
    #[arg(long)]
    pub target: Option<String>,
    /// Last in-sample year.
    #[arg(long)]
    pub boundary: Option<i32>,
}

#[derive(Debug, Args)]
pub struct DecomposeArgs {
    #[command(flatten)]
    pub data: DataArgs,
    /// Column to decompose; the target by default.
    #[arg(long)]
    pub series: Option<String>,
    /// Noise amplitude; chosen from the configured candidates when absent.
    #[arg(long)]
    pub amplitude: Option<f64>,
    #[arg(long)]
    pub ensemble: Option<usize>,
    /// Also write smooth/fluctuating parts split at this 1-based mode.
    #[arg(long)]
    pub split: Option<usize>,
    /// Decompose only up to this year.
    #[arg(long)]
    pub last: Option<i32>,
}

#[derive(Debug, Args)]
pub struct FitBvarArgs {
    #[command(flatten)]
    pub data: DataArgs,
    /// Univariate Bayesian AR on the target alone.
    #[arg(long)]
    pub target_only: bool,
    /// Lag order; chosen by SIC when absent.
    #[arg(long)]
    pub lag: Option<usize>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum VariantArg {
    Ar,
    En,
}

impl From<VariantArg> for Variant {
    fn from(v: VariantArg) -> Self {
        match v {
            VariantArg::Ar => Variant::Ar,
            VariantArg::En => Variant::En,
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum ModeArg {
    RecursiveOrigin,
    FullSample,
}

impl From<ModeArg> for DecompositionMode {
    fn from(m: ModeArg) -> Self {
        match m {
            ModeArg::RecursiveOrigin => DecompositionMode::RecursiveOrigin,
            ModeArg::FullSample => DecompositionMode::FullSample,
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum RefitArg {
    Frozen,
    Expanding,
}

impl From<RefitArg> for RefitPolicy {
    fn from(r: RefitArg) -> Self {
        match r {
            RefitArg::Frozen => RefitPolicy::Frozen,
            RefitArg::Expanding => RefitPolicy::Expanding,
        }
    }
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[arg(long, value_enum, default_value = "ar")]
    pub variant: VariantArg,
    #[arg(long, value_delimiter = ',')]
    pub horizons: Option<Vec<usize>>,
    #[arg(long, value_enum)]
    pub mode: Option<ModeArg>,
}

#[derive(Debug, Args)]
pub struct BacktestArgs {
    #[command(flatten)]
    pub data: DataArgs,
    /// Comma-separated model labels.
    #[arg(long, value_delimiter = ',')]
    pub models: Option<Vec<String>>,
    #[arg(long, value_delimiter = ',')]
    pub horizons: Option<Vec<usize>>,
    #[arg(long, value_enum)]
    pub mode: Option<ModeArg>,
    #[arg(long, value_enum)]
    pub refit: Option<RefitArg>,
}

#[derive(Debug, Args)]
pub struct FixtureArgs {
    #[arg(long, default_value_t = DEFAULT_LENGTH)]
    pub length: usize,
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    /// Directory written by `backtest`.
    #[arg(long)]
    pub run: PathBuf,
}

/// Parse `args` and run; returns the process exit code.
pub fn main_with<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match run(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e:#}");
            1
        }
    }
}

pub fn run(cli: Cli) -> Result<()> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cli.threads.unwrap_or(0))
        .build()
        .context("starting the worker pool")?;
    pool.install(|| execute(&cli))
}

fn execute(cli: &Cli) -> Result<()> {
    let mut cfg = match &cli.config {
        Some(p) => RunConfig::from_file(p)?,
        None => RunConfig::default(),
    };
    cfg.resolve_seed(cli.seed)?;
    match &cli.command {
        Command::Decompose(a) => decompose(cli, cfg, a),
        Command::FitBvar(a) => fit_bvar(cli, cfg, a),
        Command::TrainHybrid(a) => train_hybrid(cli, cfg, a),
        Command::Backtest(a) => run_backtest(cli, cfg, a),
        Command::MakeFixture(a) => make_fixture(cli, cfg, a),
        Command::Report(a) => report(cli, a),
    }
}

fn out_dir(cli: &Cli) -> Result<&Path> {
    match &cli.out {
        Some(p) => Ok(p),
        None => bail!("--out <DIR> is required for this command"),
    }
}

fn apply_data_args(cfg: &mut RunConfig, a: &DataArgs) {
    if let Some(d) = &a.data {
        cfg.data = Some(d.clone());
    }
    if let Some(t) = &a.target {
        cfg.target = t.clone();
    }
    if let Some(b) = a.boundary {
        cfg.boundary = Some(b);
    }
}

fn load(cfg: &RunConfig) -> Result<(Dataset, DataRef)> {
    let Some(path) = &cfg.data else {
        bail!("no input data: pass --data or set `data` in the config");
    };
    let ds = dataio::load_csv_with(path, &PanelSchema::for_target(&cfg.target)).map_err(|e| match e {
        dataio::DataError::Io { .. } => anyhow::Error::new(e),
        other => anyhow::Error::new(other).context(format!("loading {}", path.display())),
    })?;
    let data = DataRef::new(path, &ds)?;
    Ok((ds, data))
}

fn in_sample(cfg: &RunConfig, ds: &Dataset) -> Result<Dataset> {
    let boundary = cfg.boundary_for(ds)?;
    if boundary <= ds.first() || boundary >= ds.last() {
        bail!(
            "in-sample boundary {boundary} must lie strictly inside {}..{}",
            ds.first(),
            ds.last()
        );
    }
    Ok(ds.window(ds.first(), boundary)?)
}

fn warn_leakage(cfg: &RunConfig, hybrid_used: bool, manifest: &mut Manifest) {
    if cfg.mode == DecompositionMode::FullSample && hybrid_used {
        eprintln!("warning: {LEAKAGE_WARNING}");
        manifest.warnings.push(LEAKAGE_WARNING.into());
    }
}

fn start(dir: &Path, cfg: &RunConfig) -> Result<RunDir> {
    let mut run = RunDir::create(dir)?;
    run.write("config.toml", cfg.to_toml())?;
    Ok(run)
}

#[derive(Serialize)]
struct DecompositionInfo<'a> {
    series: &'a str,
    first: i32,
    last: i32,
    noise_amplitude: f64,
    ensemble_size: usize,
    noise_seed: u64,
    n_imfs: usize,
    unconverged_sifts: usize,
    reconstruction_error: f64,
    /// `(amplitude, first-mode energy)` when the amplitude was chosen.
    amplitude_scores: Vec<(f64, f64)>,
    split_index: Option<usize>,
}

fn decompose(cli: &Cli, mut cfg: RunConfig, a: &DecomposeArgs) -> Result<()> {
    apply_data_args(&mut cfg, &a.data);
    if let Some(e) = a.ensemble {
        cfg.hybrid.ensemble_size = e;
    }
    let dir = out_dir(cli)?;
    let (ds, data) = load(&cfg)?;
    let ds = match a.last {
        Some(last) => ds.window(ds.first(), last)?,
        None => ds,
    };
    let name = a.series.clone().unwrap_or_else(|| ds.target_name().to_string());
    let x = ds.require(&name)?.values();
    let seed = series_seed(cfg.seed(), &name);
    let ensemble = cfg.hybrid.ensemble_size;
    let (amplitude, amplitude_scores) = match a.amplitude {
        Some(v) => (v, Vec::new()),
        None => {
            let scores = eemd::noise_amplitude_scores(
                x,
                &cfg.hybrid.amplitudes,
                ensemble,
                seed,
                &eemd::SiftOptions::default(),
            )?;
            (eemd::select_noise_amplitude(x, &cfg.hybrid.amplitudes, ensemble, seed)?, scores)
        }
    };
    let dec = eemd::eemd(x, amplitude, ensemble, seed)?;

    let mut csv = String::from(dataio::YEAR);
    let _ = write!(csv, ",{name}");
    for k in 1..=dec.n_imfs() {
        let _ = write!(csv, ",IMF{k}");
    }
    csv.push_str(",RESIDUAL\n");
    for (i, year) in (ds.first()..=ds.last()).enumerate() {
        let _ = write!(csv, "{year},{}", dec.source[i]);
        for m in &dec.imfs {
            let _ = write!(csv, ",{}", m[i]);
        }
        let _ = writeln!(csv, ",{}", dec.residual[i]);
    }

    let mut run = start(dir, &cfg)?;
    run.write("imfs.csv", csv)?;
    if let Some(idx) = a.split {
        let parts = eemd::split_smooth(&dec, idx)?;
        let mut s = format!("{},{name},SMOOTH,FLUCTUATING\n", dataio::YEAR);
        for (i, year) in (ds.first()..=ds.last()).enumerate() {
            let _ = writeln!(s, "{year},{},{},{}", dec.source[i], parts.smooth[i], parts.fluctuating[i]);
        }
        run.write("parts.csv", s)?;
    }
    run.write_json(
        "decomposition.json",
        &DecompositionInfo {
            series: &name,
            first: ds.first(),
            last: ds.last(),
            noise_amplitude: amplitude,
            ensemble_size: ensemble,
            noise_seed: seed,
            n_imfs: dec.n_imfs(),
            unconverged_sifts: dec.unconverged_sifts,
            reconstruction_error: dec.reconstruction_error(),
            amplitude_scores,
            split_index: a.split,
        },
    )?;
    eprintln!("{name}: {} IMFs at amplitude {amplitude}", dec.n_imfs());
    run.finish(Manifest::new("decompose", &cfg, Some(data)))
}

#[derive(Serialize)]
struct BvarReport {
    model: BvarModel,
    /// `(lag order, SIC)` when the order was chosen.
    sic_scores: Vec<(usize, f64)>,
    prior: PriorSpec,
    /// In-sample one-step MAPE of the target equation per prior.
    prior_scores: Vec<(PriorSpec, f64)>,
}

fn fit_bvar(cli: &Cli, mut cfg: RunConfig, a: &FitBvarArgs) -> Result<()> {
    apply_data_args(&mut cfg, &a.data);
    let dir = out_dir(cli)?;
    let (ds, data) = load(&cfg)?;
    let ds = if a.target_only { ds.target_only() } else { ds };
    let train = in_sample(&cfg, &ds)?;
    let (lag, sic_scores) = match a.lag {
        Some(p) => (p, Vec::new()),
        None => (
            bvar::select_lag_sic(&train, cfg.bvar.max_lag)?,
            bvar::sic_scores(&train, cfg.bvar.max_lag)?,
        ),
    };
    let search = bvar::tune_prior(&train, lag, &cfg.prior_grid())?;
    let model = bvar::fit_with_spec(&train, lag, search.best)?;
    let label = if a.target_only { "BAR" } else { "BVAR" };
    eprintln!(
        "{label}: lag {lag}, prior tightness {} decay {} cross {}",
        search.best.tightness, search.best.decay, search.best.cross_weight
    );
    let mut run = start(dir, &cfg)?;
    run.write_json(
        "bvar.json",
        &BvarReport {
            model,
            sic_scores,
            prior: search.best,
            prior_scores: search.table,
        },
    )?;
    run.finish(Manifest::new(if a.target_only { "fit-bvar --target-only" } else { "fit-bvar" }, &cfg, Some(data)))
}

#[derive(Serialize)]
struct Selection<'a> {
    horizon: usize,
    part: &'static str,
    inputs: &'a InputSpec,
}

fn train_hybrid(cli: &Cli, mut cfg: RunConfig, a: &TrainArgs) -> Result<()> {
    apply_data_args(&mut cfg, &a.data);
    if let Some(h) = &a.horizons {
        cfg.horizons = h.clone();
    }
    if let Some(m) = a.mode {
        cfg.mode = m.into();
    }
    let variant: Variant = a.variant.into();
    let dir = out_dir(cli)?;
    let (ds, data) = load(&cfg)?;
    dataio::check_variant(&ds, variant)?;
    let mut manifest = Manifest::new("train-hybrid", &cfg, Some(data));
    warn_leakage(&cfg, true, &mut manifest);
    let train_len = in_sample(&cfg, &ds)?.len();
    let pcfg = cfg.pipeline(variant);
    let built = pipeline::build(&ds, train_len, &pcfg, &cfg.horizons, cfg.mode)?;
    let model = &built.model;

    let mut selections = Vec::new();
    for hm in &model.horizons {
        selections.push(Selection { horizon: hm.horizon, part: "smooth", inputs: &hm.smooth.inputs });
        selections.push(Selection { horizon: hm.horizon, part: "fluctuating", inputs: &hm.fluctuating.inputs });
    }
    let target = built.panel.target();
    let mut parts = format!("{},{},SMOOTH,FLUCTUATING\n", dataio::YEAR, target.name);
    for i in 0..train_len {
        let _ = writeln!(
            parts,
            "{},{},{},{}",
            built.panel.first + i as i32,
            target.raw[i],
            target.smooth[i],
            target.fluctuating[i]
        );
    }
    eprintln!(
        "{}: split at mode {} of {}, amplitude {}",
        variant.label(),
        model.split_index,
        model.target_imfs,
        model.amplitudes[0].1
    );
    let mut run = start(dir, &cfg)?;
    run.write_json("model.json", model)?;
    run.write_json("selected_variables.json", &selections)?;
    run.write("parts.csv", parts)?;
    run.finish(manifest)
}

fn run_backtest(cli: &Cli, mut cfg: RunConfig, a: &BacktestArgs) -> Result<()> {
    apply_data_args(&mut cfg, &a.data);
    if let Some(m) = &a.models {
        cfg.models = m.clone();
    }
    if let Some(h) = &a.horizons {
        cfg.horizons = h.clone();
    }
    if let Some(m) = a.mode {
        cfg.mode = m.into();
    }
    if let Some(r) = a.refit {
        cfg.refit = r.into();
    }
    let dir = out_dir(cli)?;
    let (ds, data) = load(&cfg)?;
    if cfg.uses_variant(Variant::En) {
        dataio::check_variant(&ds, Variant::En)?;
    }
    let spec = cfg.backtest_spec(&ds)?;
    let mut manifest = Manifest::new("backtest", &cfg, Some(data));
    warn_leakage(&cfg, cfg.uses_variant(Variant::Ar) || cfg.uses_variant(Variant::En), &mut manifest);
    let report = backtest::run(&spec, &ds)?;
    for f in &report.failures {
        eprintln!("warning: {} failed: {}", f.model, f.message);
        manifest.warnings.push(format!("{} failed: {}", f.model, f.message));
    }
    let mut run = start(dir, &cfg)?;
    output::write_backtest(&mut run, &report)?;
    print!("{}", output::table1(&report.reports));
    run.finish(manifest)
}

fn make_fixture(cli: &Cli, cfg: RunConfig, a: &FixtureArgs) -> Result<()> {
    let dir = out_dir(cli)?;
    let ds = fixture::make_fixture(cfg.seed(), a.length)?;
    let mut text = Vec::new();
    dataio::write_csv(&ds, &mut text)?;
    let mut run = RunDir::create(dir)?;
    run.write("panel.csv", text)?;
    let data = DataRef::new(&run.path().join("panel.csv"), &ds)?;
    run.finish(Manifest::new("make-fixture", &cfg, Some(data)))
}

fn report(cli: &Cli, a: &ReportArgs) -> Result<()> {
    let reports = output::read_reports(&a.run)?;
    let dir = cli.out.as_deref().unwrap_or(&a.run);
    let mut run = RunDir::create(dir)?;
    output::write_tables(&mut run, &reports)?;
    print!("{}", output::table1(&reports));
    Ok(())
}
