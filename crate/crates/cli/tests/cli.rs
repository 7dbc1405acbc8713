use std::fs;
use std::path::Path;

use hybridcast::cli::{main_with, LEAKAGE_WARNING};
use hybridcast::config::{RunConfig, SplitName, SplitSetting, SEED_ENV};
use hybridcast::dataio::{self, check_variant, load_csv, parse_csv, DataError, PanelSchema};
use hybridcast::output::{self, Manifest};
use hybridcast_core::fixture::make_fixture;
use hybridcast_core::pipeline::Variant;

fn run(args: &[&str]) -> i32 {
    main_with(std::iter::once("hybridcast").chain(args.iter().copied()))
}

fn fixture_csv(dir: &Path) -> String {
    let path = dir.join("panel.csv");
    dataio::save_csv(&make_fixture(42, 150).unwrap(), &path).unwrap();
    path.to_str().unwrap().to_string()
}

const TINY: &str = r#"boundary = 1988
horizons = [1]

[hybrid]
amplitudes = [0.05]
ensemble_size = 10

[hybrid.custom_grid]
kernels = ["linear"]
costs = [1.0]
epsilons = [0.1]
gammas = [0.1]
degrees = [2]
coefs = [0.0]
"#;

fn tiny_config(dir: &Path, extra: &str) -> String {
    let path = dir.join("run.toml");
    fs::write(&path, format!("{extra}\n{TINY}")).unwrap();
    path.to_str().unwrap().to_string()
}

#[test]
fn csv_round_trip_is_exact() {
    let dir = tempfile::tempdir().unwrap();
    let ds = make_fixture(42, 150).unwrap();
    let path = dir.path().join("p.csv");
    dataio::save_csv(&ds, &path).unwrap();
    assert_eq!(load_csv(&path).unwrap(), ds);
}

#[test]
fn gap_names_the_missing_year() {
    let text = "YEAR,RHP\n1948,1.0\n1949,2.0\n1951,3.0\n";
    let err = parse_csv(text.as_bytes(), &PanelSchema::house_prices()).unwrap_err();
    assert!(matches!(err, DataError::Gap { missing: 1950, .. }), "{err}");
    assert!(err.to_string().contains("1950"));
}

#[test]
fn schema_checks() {
    let hp = PanelSchema::house_prices();
    let subset = parse_csv("YEAR,FISPOL,RHP\n2000,1,10\n2001,2,11\n2002,3,12\n".as_bytes(), &hp).unwrap();
    assert_eq!(subset.names().collect::<Vec<_>>(), ["RHP", "FISPOL"]);
    assert_eq!(subset.target_name(), "RHP");

    let unknown = parse_csv("YEAR,RHP,GOLD\n2000,1,2\n2001,1,2\n".as_bytes(), &hp).unwrap_err();
    assert!(matches!(unknown, DataError::UnknownColumn(ref c) if c == "GOLD"));
    let missing = parse_csv("YEAR,FISPOL\n2000,1\n2001,1\n".as_bytes(), &hp).unwrap_err();
    assert!(matches!(missing, DataError::MissingColumn(_)));
    let cell = parse_csv("YEAR,RHP,INFL\n2000,1,2\n2001,1,n/a\n".as_bytes(), &hp).unwrap_err();
    assert!(matches!(cell, DataError::BadCell { line: 3, ref column, .. } if column == "INFL"), "{cell}");
    let order = parse_csv("YEAR,RHP\n2001,1\n2000,1\n".as_bytes(), &hp).unwrap_err();
    assert!(matches!(order, DataError::NotIncreasing { .. }));
    let short = parse_csv("YEAR,RHP\n2001,1\n".as_bytes(), &hp).unwrap_err();
    assert!(matches!(short, DataError::TooShort(1)));

    let open = parse_csv("YEAR,GOLD,WAGE\n2000,1,2\n2001,1,2\n".as_bytes(), &PanelSchema::open("WAGE")).unwrap();
    assert_eq!(open.target_name(), "WAGE");
}

#[test]
fn elastic_net_needs_predictors() {
    let ds = parse_csv("YEAR,RHP\n2000,1\n2001,2\n".as_bytes(), &PanelSchema::house_prices()).unwrap();
    assert!(check_variant(&ds, Variant::Ar).is_ok());
    let err = check_variant(&ds, Variant::En).unwrap_err();
    assert!(err.to_string().contains("EEMD-AR-SVR"), "{err}");
}

#[test]
fn config_keys_and_seed_precedence() {
    let cfg: RunConfig = toml::from_str("seed = 7\n[hybrid]\nsplit = 3\n").unwrap();
    assert_eq!(cfg.hybrid.split, SplitSetting::Fixed(3));
    let cfg: RunConfig = toml::from_str("[hybrid]\nsplit = \"in-sample\"\n").unwrap();
    assert_eq!(cfg.hybrid.split, SplitSetting::Rule(SplitName::InSample));
    assert!(toml::from_str::<RunConfig>("sed = 7\n").is_err());

    let round: RunConfig = toml::from_str(&RunConfig::default().to_toml()).unwrap();
    assert_eq!(round, RunConfig::default());

    // the only test touching the variable
    std::env::set_var(SEED_ENV, "11");
    let mut with_seed: RunConfig = toml::from_str("seed = 7").unwrap();
    assert_eq!(with_seed.clone().resolve_seed(Some(3)).unwrap(), 3);
    assert_eq!(with_seed.resolve_seed(None).unwrap(), 7);
    assert_eq!(RunConfig::default().resolve_seed(None).unwrap(), 11);
    std::env::remove_var(SEED_ENV);
    assert_eq!(RunConfig::default().resolve_seed(None).unwrap(), 0);
}

#[test]
fn decomposition_columns_sum_to_the_series() {
    let dir = tempfile::tempdir().unwrap();
    let data = fixture_csv(dir.path());
    let out = dir.path().join("dec");
    let code = run(&[
        "--seed", "5", "--out", out.to_str().unwrap(), "decompose", "--data", &data,
        "--series", "INFL", "--ensemble", "20", "--split", "2",
    ]);
    assert_eq!(code, 0);
    let text = fs::read_to_string(out.join("imfs.csv")).unwrap();
    let mut lines = text.lines();
    let header: Vec<&str> = lines.next().unwrap().split(',').collect();
    assert_eq!(header[..2], ["YEAR", "INFL"]);
    assert_eq!(header.last(), Some(&"RESIDUAL"));
    let mut rows = 0;
    for line in lines {
        let v: Vec<f64> = line.split(',').map(|c| c.parse().unwrap()).collect();
        let sum: f64 = v[2..].iter().sum();
        assert!((sum - v[1]).abs() <= 1e-8 * v[1].abs().max(1.0), "{line}");
        rows += 1;
    }
    assert_eq!(rows, 150);
    let manifest: Manifest = serde_json::from_str(&fs::read_to_string(out.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest.seed, 5);
    assert_eq!(manifest.artifacts, ["config.toml", "decomposition.json", "imfs.csv", "parts.csv"]);
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(run(&["frobnicate"]), 2);
    assert_eq!(run(&["--version"]), 0);
    let out = dir.path().join("x");
    assert_eq!(run(&["--out", out.to_str().unwrap(), "fit-bvar", "--data", "missing.csv"]), 1);
    assert_eq!(run(&["fit-bvar", "--data", "missing.csv"]), 1);

    let only = dir.path().join("rhp.csv");
    fs::write(&only, "YEAR,RHP\n2000,1\n2001,2\n2002,3\n").unwrap();
    let code = run(&[
        "--out", out.to_str().unwrap(), "backtest", "--data", only.to_str().unwrap(),
        "--models", "RW,EEMD-EN-SVR",
    ]);
    assert_eq!(code, 1);
    assert!(!out.join("manifest.json").exists());
}

#[test]
fn backtest_files_and_report_rebuild() {
    let dir = tempfile::tempdir().unwrap();
    let data = fixture_csv(dir.path());
    let cfg = tiny_config(dir.path(), "");
    let out = dir.path().join("bt");
    let code = run(&[
        "--seed", "42", "--config", &cfg, "--out", out.to_str().unwrap(), "backtest", "--data", &data,
        "--models", "RW,RW-drift,BAR", "--horizons", "1,2",
    ]);
    assert_eq!(code, 0);
    for f in ["table1.csv", "table2.csv", "reports.csv", "reports.json", "forecasts/forecasts.csv",
        "summaries.json", "failures.json", "plots/rw_h1.dat", "plots/bar_h2.dat", "config.toml"]
    {
        assert!(out.join(f).is_file(), "{f}");
    }
    let table1 = fs::read_to_string(out.join("table1.csv")).unwrap();
    assert!(table1.starts_with("model,in_mape,in_ds,out_mape,out_ds\nRW,"));
    assert_eq!(table1.lines().count(), 4);
    let table2 = fs::read_to_string(out.join("table2.csv")).unwrap();
    assert_eq!(table2.lines().next().unwrap(), "horizon,RW_mape,RW_ds,RW-drift_mape,RW-drift_ds,BAR_mape,BAR_ds");
    let forecasts = fs::read_to_string(out.join("forecasts/forecasts.csv")).unwrap();
    // 24 one-step and 23 two-step origins per model
    assert_eq!(forecasts.lines().count(), 1 + 3 * (24 + 23));

    let rebuilt = dir.path().join("again");
    assert_eq!(run(&["--out", rebuilt.to_str().unwrap(), "report", "--run", out.to_str().unwrap()]), 0);
    for f in ["table1.csv", "table2.csv", "plots/rw_h1.dat"] {
        assert_eq!(fs::read(out.join(f)).unwrap(), fs::read(rebuilt.join(f)).unwrap(), "{f}");
    }
    let reports = output::read_reports(&out).unwrap();
    assert_eq!(reports.len(), 3 * 2 * 2);
}

#[test]
fn train_hybrid_writes_model_and_flags_full_sample_mode() {
    let dir = tempfile::tempdir().unwrap();
    let data = fixture_csv(dir.path());
    let cfg = tiny_config(dir.path(), "mode = \"full-sample\"");
    let out = dir.path().join("train");
    let code = run(&[
        "--seed", "42", "--config", &cfg, "--out", out.to_str().unwrap(), "train-hybrid", "--data", &data,
        "--variant", "en",
    ]);
    assert_eq!(code, 0);
    let model: serde_json::Value = serde_json::from_str(&fs::read_to_string(out.join("model.json")).unwrap()).unwrap();
    assert_eq!(model["variant"], "en");
    let selected: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out.join("selected_variables.json")).unwrap()).unwrap();
    let parts: Vec<&str> = selected.as_array().unwrap().iter().map(|s| s["part"].as_str().unwrap()).collect();
    assert_eq!(parts, ["smooth", "fluctuating"]);
    let manifest: Manifest = serde_json::from_str(&fs::read_to_string(out.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest.warnings, [LEAKAGE_WARNING]);
    assert_eq!(manifest.data.unwrap().columns.len(), 11);
}
