//! Panel CSV ingestion and export.
//!
//! The input format is one header row naming `YEAR` and the series, then one
//! row per consecutive year. Values are levels, read as-is.

use std::fs::File;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use hybridcast_core::pipeline::Variant;
use hybridcast_core::{align, Dataset, TimeSeries};

pub const YEAR: &str = "YEAR";
pub const TARGET: &str = "RHP";

/// The eleven house-price panel series in their documented order.
pub const HOUSE_PRICE_COLUMNS: [&str; 11] = [
    "RHP", "FISPOL", "RGDPPC", "UNEMPL", "LTR", "STR", "INFL", "POP", "RCONSTR", "RSP", "ROILP",
];

/// Which columns a panel file may carry besides `YEAR`.
#[derive(Debug, Clone, PartialEq)]
pub struct PanelSchema {
    pub target: String,
    /// Allowed predictor names; `None` accepts any.
    pub predictors: Option<Vec<String>>,
}

impl PanelSchema {
    /// `RHP` plus any subset of the ten house-price predictors.
    pub fn house_prices() -> Self {
        Self {
            target: TARGET.into(),
            predictors: Some(HOUSE_PRICE_COLUMNS[1..].iter().map(|s| s.to_string()).collect()),
        }
    }

    /// A named target with any other columns as predictors.
    pub fn open(target: &str) -> Self {
        Self {
            target: target.into(),
            predictors: None,
        }
    }

    /// The strict house-price schema for `RHP`, an open one for anything else.
    pub fn for_target(target: &str) -> Self {
        if target == TARGET {
            Self::house_prices()
        } else {
            Self::open(target)
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum DataError {
    #[error("cannot access {}", path.display())]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("line {line}: {message}")]
    Csv { line: u64, message: String },
    #[error("the file has no header row")]
    Empty,
    #[error("the header must start with `{YEAR}`, found `{0}`")]
    NoYearColumn(String),
    #[error("required column `{0}` is missing from the header")]
    MissingColumn(String),
    #[error("column `{0}` is not part of the panel schema")]
    UnknownColumn(String),
    #[error("column `{0}` appears twice")]
    DuplicateColumn(String),
    #[error("line {line}: expected {expected} cells, found {found}")]
    RowLength { line: u64, expected: usize, found: usize },
    #[error("line {line}: YEAR `{value}` is not an integer")]
    BadYear { line: u64, value: String },
    #[error("line {line}: year {missing} is missing (previous row is {previous}, this row is {found})")]
    Gap {
        line: u64,
        missing: i32,
        previous: i32,
        found: i32,
    },
    #[error("line {line}: year {found} does not follow {previous}")]
    NotIncreasing { line: u64, previous: i32, found: i32 },
    #[error("line {line}, column `{column}`: `{value}` is not a finite number")]
    BadCell {
        line: u64,
        column: String,
        value: String,
    },
    #[error("the file has {0} data rows; at least 2 are needed")]
    TooShort(usize),
    #[error(
        "{variant} selects among predictor series, but the file only has `{target}`; \
         add predictor columns or use EEMD-AR-SVR"
    )]
    NoPredictors { variant: &'static str, target: String },
    #[error(transparent)]
    Core(#[from] hybridcast_core::Error),
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> DataError + '_ {
    move |source| DataError::Io {
        path: path.to_path_buf(),
        source,
    }
}

pub fn load_csv(path: impl AsRef<Path>) -> Result<Dataset, DataError> {
    load_csv_with(path, &PanelSchema::house_prices())
}

pub fn load_csv_with(path: impl AsRef<Path>, schema: &PanelSchema) -> Result<Dataset, DataError> {
    let path = path.as_ref();
    let file = File::open(path).map_err(io_err(path))?;
    parse_csv(file, schema)
}

/// Read and validate a panel; the target comes first in the result.
pub fn parse_csv<R: Read>(reader: R, schema: &PanelSchema) -> Result<Dataset, DataError> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .flexible(true)
        .from_reader(reader);
    let mut records = rdr.records();
    let header = match records.next() {
        Some(r) => r.map_err(csv_err)?,
        None => return Err(DataError::Empty),
    };
    let names: Vec<String> = header.iter().map(|s| s.to_string()).collect();
    match names.first() {
        Some(first) if first == YEAR => {}
        Some(first) => return Err(DataError::NoYearColumn(first.clone())),
        None => return Err(DataError::Empty),
    }
    let series_names = &names[1..];
    for (i, n) in series_names.iter().enumerate() {
        if series_names[..i].contains(n) || n == YEAR {
            return Err(DataError::DuplicateColumn(n.clone()));
        }
        if n != &schema.target {
            if let Some(allowed) = &schema.predictors {
                if !allowed.contains(n) {
                    return Err(DataError::UnknownColumn(n.clone()));
                }
            }
        }
    }
    if !series_names.contains(&schema.target) {
        return Err(DataError::MissingColumn(schema.target.clone()));
    }

    let mut years: Vec<i32> = Vec::new();
    let mut columns: Vec<Vec<f64>> = vec![Vec::new(); series_names.len()];
    for record in records {
        let record = record.map_err(csv_err)?;
        let line = record.position().map_or(0, |p| p.line());
        if record.iter().all(|c| c.is_empty()) {
            continue;
        }
        if record.len() != names.len() {
            return Err(DataError::RowLength {
                line,
                expected: names.len(),
                found: record.len(),
            });
        }
        let raw_year = &record[0];
        let year: i32 = raw_year.parse().map_err(|_| DataError::BadYear {
            line,
            value: raw_year.to_string(),
        })?;
        if let Some(&previous) = years.last() {
            if year <= previous {
                return Err(DataError::NotIncreasing {
                    line,
                    previous,
                    found: year,
                });
            }
            if year != previous + 1 {
                return Err(DataError::Gap {
                    line,
                    missing: previous + 1,
                    previous,
                    found: year,
                });
            }
        }
        years.push(year);
        for (j, cell) in record.iter().skip(1).enumerate() {
            let v: f64 = cell
                .parse()
                .ok()
                .filter(|v: &f64| v.is_finite())
                .ok_or_else(|| DataError::BadCell {
                    line,
                    column: series_names[j].clone(),
                    value: cell.to_string(),
                })?;
            columns[j].push(v);
        }
    }
    if years.len() < 2 {
        return Err(DataError::TooShort(years.len()));
    }
    let start = years[0];
    let mut ordered: Vec<TimeSeries> = Vec::with_capacity(columns.len());
    let target_pos = series_names.iter().position(|n| n == &schema.target).unwrap_or(0);
    ordered.push(TimeSeries::new(&series_names[target_pos], start, columns[target_pos].clone())?);
    for (j, values) in columns.into_iter().enumerate() {
        if j != target_pos {
            ordered.push(TimeSeries::new(&series_names[j], start, values)?);
        }
    }
    Ok(align(ordered)?)
}

fn csv_err(e: csv::Error) -> DataError {
    DataError::Csv {
        line: e.position().map_or(0, |p| p.line()),
        message: e.to_string(),
    }
}

/// Reject a target-only panel for the elastic-net variant.
pub fn check_variant(ds: &Dataset, variant: Variant) -> Result<(), DataError> {
    if variant == Variant::En && ds.series().len() < 2 {
        return Err(DataError::NoPredictors {
            variant: variant.label(),
            target: ds.target_name().into(),
        });
    }
    Ok(())
}

pub fn save_csv(ds: &Dataset, path: impl AsRef<Path>) -> Result<(), DataError> {
    let path = path.as_ref();
    let file = File::create(path).map_err(io_err(path))?;
    write_csv(ds, file).map_err(io_err(path))
}

/// `YEAR` then every series in dataset order, shortest round-trip decimals.
pub fn write_csv<W: Write>(ds: &Dataset, writer: W) -> std::io::Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    let mut header = vec![YEAR.to_string()];
    header.extend(ds.names().map(String::from));
    w.write_record(&header)?;
    for (i, year) in (ds.first()..=ds.last()).enumerate() {
        let mut row = vec![year.to_string()];
        row.extend(ds.series().iter().map(|s| s.values()[i].to_string()));
        w.write_record(&row)?;
    }
    w.flush()
}
