use hybridcast_core::backtest::{self, BacktestSpec, ModelSpec};
use hybridcast_core::eemd;
use hybridcast_core::fixture::{make_fixture, DEFAULT_LENGTH};
use hybridcast_core::metrics;
use hybridcast_core::pipeline::{
    self, series_seed, Built, DecompositionMode, PipelineConfig, SplitRule, Variant,
};
use hybridcast_core::series::{feature_row, LagInput, LagMatrix};
use hybridcast_core::svr::{self, GridSpec, KernelKind, SvrModel};
use hybridcast_core::{align, Dataset, TimeSeries};

const BOUNDARY: i32 = 1988;

fn tiny_grid() -> GridSpec {
    GridSpec {
        kernels: vec![KernelKind::Linear],
        costs: vec![1.0, 16.0],
        epsilons: vec![0.01, 0.1],
        gammas: vec![0.1],
        degrees: vec![2],
        coefs: vec![0.0],
    }
}

fn tiny(variant: Variant) -> PipelineConfig {
    PipelineConfig {
        variant,
        amplitudes: vec![0.05, 0.2],
        ensemble_size: 20,
        seed: 42,
        grid: tiny_grid(),
        ..Default::default()
    }
}

fn fixture() -> Dataset {
    make_fixture(42, DEFAULT_LENGTH).unwrap()
}

fn train_len(ds: &Dataset) -> usize {
    (BOUNDARY - ds.first() + 1) as usize
}

fn build_ar(ds: &Dataset, cfg: &PipelineConfig, horizons: &[usize]) -> Built {
    pipeline::build(ds, train_len(ds), cfg, horizons, DecompositionMode::RecursiveOrigin).unwrap()
}

#[test]
fn forecast_is_the_sum_of_independent_part_forecasts() {
    let ds = fixture();
    let cfg = tiny(Variant::Ar);
    let built = build_ar(&ds, &cfg, &[1, 3]);
    let model = &built.model;
    let target = built.panel.target();
    let smooth_lags: Vec<usize> = (1..=cfg.smooth_lags).collect();
    let fluct_lags: Vec<usize> = (1..=cfg.fluct_lags).collect();
    for h in [1, 3] {
        let hm = model.horizon(h).unwrap();
        for anchor in [5, 40, 90, train_len(&ds) - 1] {
            let s_row = feature_row(
                &[LagInput { name: "RHP", values: &target.smooth, lags: &smooth_lags }],
                anchor,
            )
            .unwrap();
            let f_row = feature_row(
                &[LagInput { name: "RHP", values: &target.fluctuating, lags: &fluct_lags }],
                anchor,
            )
            .unwrap();
            let s = hm.smooth.svr.predict(&s_row).unwrap();
            let f = hm.fluctuating.svr.predict(&f_row).unwrap();
            let out = model.predict(&built.panel, anchor, h).unwrap();
            assert_eq!(out.smooth, s);
            assert_eq!(out.fluctuating, f);
            assert!((out.total - (s + f)).abs() <= 1e-12);
        }
    }
}

#[test]
fn constant_part_models_give_constant_forecasts() {
    let ds = fixture();
    let built = build_ar(&ds, &PipelineConfig { split: SplitRule::Fixed(3), ..tiny(Variant::Ar) }, &[1, 2, 4]);
    let mut model = built.model.clone();
    let (bs, bf) = (101.25, -3.5);
    for hm in &mut model.horizons {
        hm.smooth.svr = SvrModel::constant(bs, hm.smooth.svr.dims());
        hm.fluctuating.svr = SvrModel::constant(bf, hm.fluctuating.svr.dims());
    }
    for h in [1, 2, 4] {
        for anchor in (5..train_len(&ds)).step_by(17) {
            assert_eq!(model.predict(&built.panel, anchor, h).unwrap().total, bs + bf);
        }
    }
}

#[test]
fn split_one_leaves_no_fluctuating_part() {
    let ds = fixture();
    let built = build_ar(&ds, &PipelineConfig { split: SplitRule::Fixed(1), ..tiny(Variant::Ar) }, &[1]);
    let target = built.panel.target();
    assert!(target.fluctuating.iter().all(|v| *v == 0.0));
    for (s, r) in target.smooth.iter().zip(&target.raw) {
        assert!((s - r).abs() <= 1e-8 * r.abs());
    }
    for anchor in 5..train_len(&ds) - 1 {
        let p = built.model.predict(&built.panel, anchor, 1).unwrap();
        assert!(p.fluctuating.abs() <= 0.1, "fluctuating forecast {}", p.fluctuating);
        assert_eq!(p.total, p.smooth + p.fluctuating);
    }
}

#[test]
fn ar_variant_beats_random_walk_in_sample() {
    let ds = fixture();
    let built = build_ar(&ds, &tiny(Variant::Ar), &[1]);
    let n = train_len(&ds);
    let raw = &built.panel.target().raw;
    let fitted = built.model.fitted(&built.panel, 1, n).unwrap();
    let actual: Vec<f64> = fitted.iter().map(|(a, _)| raw[a + 1]).collect();
    let hybrid: Vec<f64> = fitted.iter().map(|(_, p)| p.total).collect();
    let naive: Vec<f64> = fitted.iter().map(|(a, _)| raw[*a]).collect();
    let h = metrics::mape(&actual, &hybrid).unwrap();
    let rw = metrics::mape(&actual, &naive).unwrap();
    assert!(h < rw, "hybrid {h} vs random walk {rw}");
}

/// Fixture target, a series equal to the target one step ahead, and two
/// unrelated predictors.
fn leak_panel() -> Dataset {
    let ds = fixture();
    let y = ds.target().values();
    let n = y.len() - 1;
    let first = ds.first();
    let take = |name: &str| {
        TimeSeries::new(name, first, ds.get(name).unwrap().values()[..n].to_vec()).unwrap()
    };
    align(vec![
        TimeSeries::new("RHP", first, y[..n].to_vec()).unwrap(),
        take("FISPOL"),
        TimeSeries::new("LEAD", first, y[1..].to_vec()).unwrap(),
        take("INFL"),
    ])
    .unwrap()
}

#[test]
fn elastic_net_keeps_a_leading_predictor_at_lag_one() {
    let ds = leak_panel();
    let cfg = PipelineConfig { split: SplitRule::Fixed(3), ..tiny(Variant::En) };
    let built = build_ar(&ds, &cfg, &[1]);
    let hm = built.model.horizon(1).unwrap();
    let has_lead = |inputs: &pipeline::InputSpec| {
        inputs
            .variables
            .iter()
            .any(|(v, lags)| v == "LEAD" && lags.contains(&1))
    };
    assert!(
        has_lead(&hm.smooth.inputs) || has_lead(&hm.fluctuating.inputs),
        "smooth {:?} fluctuating {:?}",
        hm.smooth.inputs.variables,
        hm.fluctuating.inputs.variables
    );
}

#[test]
fn elastic_net_variant_rejects_a_target_only_panel() {
    let ds = fixture().target_only();
    let err = pipeline::build(&ds, train_len(&ds), &tiny(Variant::En), &[1], DecompositionMode::RecursiveOrigin);
    assert!(err.is_err());
}

#[test]
fn ar_variant_ignores_the_predictor_panel() {
    let ds = fixture();
    let cfg = tiny(Variant::Ar);
    let with_panel = build_ar(&ds, &cfg, &[1, 2]);
    let alone = build_ar(&ds.target_only(), &cfg, &[1, 2]);
    assert_eq!(with_panel.model, alone.model);
    assert_eq!(with_panel.panel, alone.panel);
    let history = ds.window(ds.first(), 2000).unwrap();
    let a = with_panel.model.forecast(&history, &cfg, 2).unwrap();
    let b = alone.model.forecast(&history.target_only(), &cfg, 2).unwrap();
    assert_eq!(a, b);
}

#[test]
fn build_is_deterministic() {
    let ds = fixture();
    let cfg = tiny(Variant::Ar);
    let a = build_ar(&ds, &cfg, &[1, 2]);
    let b = build_ar(&ds, &cfg, &[1, 2]);
    assert_eq!(a.model, b.model);
    assert_eq!(a.panel, b.panel);
}

#[test]
fn pinned_split_choice() {
    let ds = fixture();
    let built = build_ar(&ds, &tiny(Variant::Ar), &[1]);
    let m = &built.model;
    assert_eq!(m.amplitudes, [("RHP".to_string(), 0.05)]);
    assert_eq!(m.target_imfs, 4);
    assert_eq!(m.split_scores.len(), 5);
    assert_eq!(m.split_index, 4);
}

fn spec(models: Vec<ModelSpec>, horizons: Vec<usize>) -> BacktestSpec {
    BacktestSpec {
        horizons,
        ..BacktestSpec::new(models, BOUNDARY)
    }
}

#[test]
fn recursive_forecasts_do_not_see_later_data() {
    let ds = fixture();
    let cut = 2001;
    let short = ds.window(ds.first(), cut).unwrap();
    let s = spec(vec![ModelSpec::Hybrid(tiny(Variant::Ar))], vec![1, 3]);
    let full = backtest::run(&s, &ds).unwrap();
    let truncated = backtest::run(&s, &short).unwrap();
    assert!(full.failures.is_empty() && truncated.failures.is_empty());
    let kept: Vec<_> = full
        .forecasts
        .iter()
        .filter(|r| r.origin + r.horizon as i32 <= cut)
        .collect();
    assert_eq!(kept.len(), truncated.forecasts.len());
    for (a, b) in kept.iter().zip(&truncated.forecasts) {
        assert_eq!(*a, b);
    }
}

/// Straight-line recomputation of one recursive-origin, expanding-refit
/// forecast from the frozen choices of the built model.
fn hand_forecast(ds: &Dataset, built: &Built, cfg: &PipelineConfig, origin_year: i32, h: usize) -> f64 {
    let model = &built.model;
    let origin = (origin_year - ds.first()) as usize;
    let y = &ds.target().values()[..=origin];
    let amplitude = model.amplitudes[0].1;
    let dec = eemd::eemd(y, amplitude, cfg.ensemble_size, series_seed(cfg.seed, "RHP")).unwrap();
    let split = eemd::split_smooth(&dec, model.split_index).unwrap();
    let hm = model.horizon(h).unwrap();
    let mut total = 0.0;
    for (values, lags, config) in [
        (&split.smooth, cfg.smooth_lags, &hm.smooth.config),
        (&split.fluctuating, cfg.fluct_lags, &hm.fluctuating.config),
    ] {
        let lags: Vec<usize> = (1..=lags).collect();
        let input = [LagInput { name: "RHP", values, lags: &lags }];
        let m = LagMatrix::build_anchored(&input, values, h, model.first_anchor..origin + 1).unwrap();
        let fit = svr::train(&m, config).unwrap();
        total += fit.predict(&feature_row(&input, origin).unwrap()).unwrap();
    }
    total
}

#[test]
fn two_step_forecast_matches_hand_recomputation() {
    let ds = fixture();
    let cfg = tiny(Variant::Ar);
    let s = spec(vec![ModelSpec::Hybrid(cfg.clone())], vec![2]);
    let report = backtest::run(&s, &ds).unwrap();
    let record = report
        .forecasts
        .iter()
        .find(|r| r.origin == 2005 && r.horizon == 2)
        .unwrap();
    let built = build_ar(&ds, &cfg, &[2]);
    let hand = hand_forecast(&ds, &built, &cfg, 2005, 2);
    assert!((record.forecast - hand).abs() <= 1e-9, "{} vs {hand}", record.forecast);
    assert!((hand - 130.063964373484).abs() <= 1e-6, "pinned value drifted: {hand}");
}
