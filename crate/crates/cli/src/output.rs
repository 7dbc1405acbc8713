//! Run directories and the files written into them.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use hybridcast_core::backtest::{BacktestReport, ForecastRecord};
use hybridcast_core::metrics::{EvalReport, Sample};

use crate::config::RunConfig;

pub const MANIFEST: &str = "manifest.json";
pub const REPORTS_JSON: &str = "reports.json";
pub const FORECASTS_CSV: &str = "forecasts/forecasts.csv";

/// A directory of artifacts; every file goes through [`RunDir::write`] so the
/// manifest can list it.
pub struct RunDir {
    root: PathBuf,
    artifacts: Vec<String>,
}

impl RunDir {
    pub fn create(root: &Path) -> Result<Self> {
        fs::create_dir_all(root).with_context(|| format!("creating {}", root.display()))?;
        Ok(Self {
            root: root.to_path_buf(),
            artifacts: Vec::new(),
        })
    }

    pub fn path(&self) -> &Path {
        &self.root
    }

    pub fn write(&mut self, rel: &str, contents: impl AsRef<[u8]>) -> Result<()> {
        let path = self.root.join(rel);
        if let Some(dir) = path.parent() {
            fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
        }
        fs::write(&path, contents).with_context(|| format!("writing {}", path.display()))?;
        if !self.artifacts.iter().any(|a| a == rel) {
            self.artifacts.push(rel.to_string());
        }
        Ok(())
    }

    pub fn write_json<T: Serialize>(&mut self, rel: &str, value: &T) -> Result<()> {
        let mut text = serde_json::to_string_pretty(value)?;
        text.push('\n');
        self.write(rel, text)
    }

    /// Write the manifest last, listing every artifact written before it.
    pub fn finish(mut self, mut manifest: Manifest) -> Result<()> {
        self.artifacts.sort();
        manifest.artifacts = self.artifacts.clone();
        self.write_json(MANIFEST, &manifest)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DataRef {
    pub path: String,
    pub sha256: String,
    pub first: i32,
    pub last: i32,
    pub columns: Vec<String>,
}

impl DataRef {
    pub fn new(path: &Path, ds: &hybridcast_core::Dataset) -> Result<Self> {
        let bytes = fs::read(path).with_context(|| format!("reading {}", path.display()))?;
        Ok(Self {
            path: path.display().to_string(),
            sha256: hex(&Sha256::digest(&bytes)),
            first: ds.first(),
            last: ds.last(),
            columns: ds.names().map(String::from).collect(),
        })
    }
}

fn hex(bytes: &[u8]) -> String {
    bytes.iter().fold(String::new(), |mut s, b| {
        let _ = write!(s, "{b:02x}");
        s
    })
}

/// What produced a run directory. Holds no timestamps or thread counts, so
/// repeated runs produce identical files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub tool: String,
    pub version: String,
    pub command: String,
    pub seed: u64,
    pub data: Option<DataRef>,
    pub config: RunConfig,
    pub warnings: Vec<String>,
    pub artifacts: Vec<String>,
}

impl Manifest {
    pub fn new(command: &str, config: &RunConfig, data: Option<DataRef>) -> Self {
        Self {
            tool: env!("CARGO_PKG_NAME").into(),
            version: env!("CARGO_PKG_VERSION").into(),
            command: command.into(),
            seed: config.seed(),
            data,
            config: config.clone(),
            warnings: Vec::new(),
            artifacts: Vec::new(),
        }
    }
}

fn models_in_order(reports: &[EvalReport]) -> Vec<String> {
    let mut out: Vec<String> = Vec::new();
    for r in reports {
        if !out.contains(&r.model) {
            out.push(r.model.clone());
        }
    }
    out
}

fn find<'a>(reports: &'a [EvalReport], model: &str, sample: Sample, h: usize) -> Option<&'a EvalReport> {
    reports
        .iter()
        .find(|r| r.model == model && r.sample == sample && r.horizon == h)
}

fn cell(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// One-step accuracy per model: in- and out-of-sample MAPE and DS.
pub fn table1(reports: &[EvalReport]) -> String {
    let mut s = String::from("model,in_mape,in_ds,out_mape,out_ds\n");
    for m in models_in_order(reports) {
        let i = find(reports, &m, Sample::InSample, 1);
        let o = find(reports, &m, Sample::OutOfSample, 1);
        let _ = writeln!(
            s,
            "{m},{},{},{},{}",
            cell(i.map(|r| r.mape_pct)),
            cell(i.map(|r| r.ds_pct)),
            cell(o.map(|r| r.mape_pct)),
            cell(o.map(|r| r.ds_pct)),
        );
    }
    s
}

/// Out-of-sample MAPE and DS, one row per horizon, two columns per model.
pub fn table2(reports: &[EvalReport]) -> String {
    let models = models_in_order(reports);
    let mut horizons: Vec<usize> = reports.iter().map(|r| r.horizon).collect();
    horizons.sort_unstable();
    horizons.dedup();
    let mut s = String::from("horizon");
    for m in &models {
        let _ = write!(s, ",{m}_mape,{m}_ds");
    }
    s.push('\n');
    for h in horizons {
        let _ = write!(s, "{h}");
        for m in &models {
            let o = find(reports, m, Sample::OutOfSample, h);
            let _ = write!(s, ",{},{}", cell(o.map(|r| r.mape_pct)), cell(o.map(|r| r.ds_pct)));
        }
        s.push('\n');
    }
    s
}

/// Summary rows without the forecast paths.
pub fn reports_csv(reports: &[EvalReport]) -> String {
    let mut s = String::from("model,sample,horizon,mape,ds,n_obs\n");
    for r in reports {
        let _ = writeln!(
            s,
            "{},{},{},{},{},{}",
            r.model,
            r.sample.label(),
            r.horizon,
            r.mape_pct,
            r.ds_pct,
            r.n_obs
        );
    }
    s
}

pub fn forecasts_csv(records: &[ForecastRecord]) -> String {
    let mut s = String::from("origin,horizon,model,forecast,actual\n");
    for r in records {
        let _ = writeln!(s, "{},{},{},{},{}", r.origin, r.horizon, r.model, r.forecast, r.actual);
    }
    s
}

fn file_stem(model: &str) -> String {
    model
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() { c.to_ascii_lowercase() } else { '_' })
        .collect()
}

/// Gnuplot data blocks per model and horizon: index 0 in-sample, index 1
/// out-of-sample, columns `year actual forecast`.
pub fn plot_files(reports: &[EvalReport]) -> Vec<(String, String)> {
    let mut out = Vec::new();
    let mut keys: Vec<(String, usize)> = Vec::new();
    for r in reports {
        if !keys.iter().any(|(m, h)| *m == r.model && *h == r.horizon) {
            keys.push((r.model.clone(), r.horizon));
        }
    }
    for (model, h) in keys {
        let mut s = format!("# {model}, horizon {h}\n# year actual forecast\n");
        for (k, sample) in [Sample::InSample, Sample::OutOfSample].into_iter().enumerate() {
            if k > 0 {
                s.push_str("\n\n");
            }
            let _ = writeln!(s, "# {}-sample", sample.label());
            if let Some(r) = find(reports, &model, sample, h) {
                for ((t, a), f) in r.targets.iter().zip(&r.actual).zip(&r.forecast) {
                    let _ = writeln!(s, "{t} {a} {f}");
                }
            }
        }
        out.push((format!("plots/{}_h{h}.dat", file_stem(&model)), s));
    }
    out
}

/// Tables and plot data derived from the evaluation reports.
pub fn write_tables(dir: &mut RunDir, reports: &[EvalReport]) -> Result<()> {
    dir.write("table1.csv", table1(reports))?;
    dir.write("table2.csv", table2(reports))?;
    for (rel, text) in plot_files(reports) {
        dir.write(&rel, text)?;
    }
    Ok(())
}

pub fn write_backtest(dir: &mut RunDir, report: &BacktestReport) -> Result<()> {
    write_tables(dir, &report.reports)?;
    dir.write("reports.csv", reports_csv(&report.reports))?;
    dir.write_json(REPORTS_JSON, &report.reports)?;
    dir.write(FORECASTS_CSV, forecasts_csv(&report.forecasts))?;
    dir.write_json("summaries.json", &report.summaries)?;
    dir.write_json("failures.json", &report.failures)?;
    Ok(())
}

pub fn read_reports(run: &Path) -> Result<Vec<EvalReport>> {
    let path = run.join(REPORTS_JSON);
    let text = fs::read_to_string(&path).with_context(|| format!("reading {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
}
