mod common;

use std::collections::HashMap;

use tube_nmpc::controllers::ControllerKind;
use tube_nmpc::harness::{
    apply_noise, monte_carlo, output, run_controller, sample_kinetics, sample_knockdown, ControllerSpec,
    KnockdownConfig, KnockdownWindow, MonteCarloResult, ScenarioContext, UncertaintyConfig, TRUNCATION,
};
use tube_nmpc::model::{ModelParameters, OutputVector};
use tube_nmpc::parallel::ExecutionConfig;

#[test]
fn every_shipped_scenario_builds() {
    for name in ["t0", "t1", "t1b", "t2", "t3", "t4", "t5", "t6"] {
        let ctx = ScenarioContext::from_file(&common::scenario(&format!("{name}.toml")))
            .unwrap_or_else(|e| panic!("{name}: {e}"));
        ctx.tube_config().validate().unwrap();
        assert_eq!(ctx.references.y_ref.len(), ctx.references.x_ref.len());
        assert!(ctx.references.y_ref.len() > ctx.n_steps());
    }
}

#[test]
fn first_phase_loading_matches_the_plant_diet() {
    let d = ModelParameters::default_set().digester();
    let (olr, shares) = d.config.organic_loading_rate(&common::DIET);
    assert!((olr - 2.8).abs() < 0.1, "{olr}");
    for (s, want) in shares.iter().zip([0.23, 0.49, 0.27]) {
        assert!((s - want).abs() < 0.015, "{shares:?}");
    }
}

#[test]
fn methane_reference_is_monotone_across_the_ramp() {
    let ctx = ScenarioContext::from_file(&common::scenario("t0.toml")).unwrap();
    let (a, b) = ctx.scenario.diet.transition_windows()[0];
    let tc = ctx.references.interval;
    let qm: Vec<f64> = ctx
        .references
        .y_ref
        .iter()
        .enumerate()
        .filter(|(k, _)| (*k as f64 * tc) >= a && (*k as f64 * tc) <= b)
        .map(|(_, y)| y.qm)
        .collect();
    let up = qm.windows(2).all(|w| w[1] >= w[0]);
    let down = qm.windows(2).all(|w| w[1] <= w[0]);
    assert!(up || down, "{qm:?}");
}

/// Mean and std of `N(m, (s m)^2)` truncated to `TRUNCATION`, by Simpson's rule.
fn truncated_moments(m: f64, s: f64) -> (f64, f64) {
    let sd = s * m;
    let (lo, hi) = (TRUNCATION.0 * m, TRUNCATION.1 * m);
    let pdf = |x: f64| (-0.5 * ((x - m) / sd).powi(2)).exp();
    let n = 20_000;
    let h = (hi - lo) / n as f64;
    let mut mom = [0.0; 3];
    for i in 0..=n {
        let x = lo + i as f64 * h;
        let w = if i == 0 || i == n { 1.0 } else if i % 2 == 1 { 4.0 } else { 2.0 };
        let p = w * pdf(x);
        mom[0] += p;
        mom[1] += p * x;
        mom[2] += p * x * x;
    }
    let mean = mom[1] / mom[0];
    (mean, (mom[2] / mom[0] - mean * mean).sqrt())
}

#[test]
fn kinetic_samples_have_the_configured_moments() {
    let base = ModelParameters::default_set().kinetic_params();
    let cfg = UncertaintyConfig::default();
    let n = 10_000;
    let draws: Vec<[f64; 5]> = (0..n).map(|i| sample_kinetics(&base, &cfg, i).kinetic_subset()).collect();
    for (j, nominal) in base.kinetic_subset().iter().enumerate() {
        let (m, s) = truncated_moments(*nominal, cfg.kinetic_rel_std);
        let mean = draws.iter().map(|d| d[j]).sum::<f64>() / n as f64;
        let var = draws.iter().map(|d| (d[j] - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
        assert!((mean - m).abs() < 0.01 * m, "param {j}: mean {mean} vs {m}");
        assert!((var.sqrt() - s).abs() < 0.03 * s, "param {j}: std {} vs {s}", var.sqrt());
    }
}

#[test]
fn measurement_noise_has_the_configured_spread() {
    let y = OutputVector { qm: 100.0, ratio: 1.0 };
    let v: Vec<f64> = (0..10_000).map(|t| apply_noise(y, [0.05, 0.02], 11, t).qm).collect();
    let mean = v.iter().sum::<f64>() / v.len() as f64;
    let sd = (v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (v.len() - 1) as f64).sqrt();
    assert!((sd - 5.0).abs() < 0.15, "{sd}");
    let zero = OutputVector { qm: 0.0, ratio: 0.0 };
    assert_eq!(apply_noise(zero, [0.05, 0.02], 11, 3), zero);
}

#[test]
fn knockdown_draws_center_on_the_configured_means() {
    let cfg = KnockdownConfig::default();
    let w: Vec<KnockdownWindow> = (0..1000).map(|i| sample_knockdown(&cfg, 20.0, 5, i)).collect();
    let amp = w.iter().map(|k| k.amplitude).sum::<f64>() / 1000.0;
    let dur = w.iter().map(|k| k.duration).sum::<f64>() / 1000.0;
    assert!((amp - 0.6).abs() < 0.012, "{amp}");
    assert!((dur - 7.0).abs() < 0.14, "{dur}");
}

#[test]
fn zero_length_knockdown_changes_nothing() {
    let ctx = common::short_context("t0.toml", 3.0);
    let base = ctx.realization(1);
    let mut with = base.clone();
    with.knockdown = Some(KnockdownWindow {
        center: 1.5,
        duration: 0.0,
        amplitude: 0.6,
        ramp: 1.0,
    });
    let mut without = base;
    without.knockdown = None;
    let a = run_controller(&ctx, ControllerKind::Classical, &with).unwrap();
    let b = run_controller(&ctx, ControllerKind::Classical, &without).unwrap();
    assert_eq!(a.records, b.records);
    assert_eq!(a.trajectory.states, b.trajectory.states);
}

fn batch(ctx: &ScenarioContext, kinds: &[&str], exec: ExecutionConfig) -> MonteCarloResult {
    let specs: Vec<ControllerSpec> = kinds.iter().map(|k| ControllerSpec::parse(k).unwrap()).collect();
    monte_carlo(ctx, &specs, exec, true).unwrap()
}

fn small_batch_context() -> ScenarioContext {
    let mut ctx = common::short_context("t0.toml", 3.0);
    ctx.scenario.uncertainty.n_runs = 3;
    ctx
}

#[test]
fn parallel_and_sequential_batches_agree() {
    let ctx = small_batch_context();
    let kinds = ["classical", "offline-tube"];
    let a = batch(&ctx, &kinds, ExecutionConfig::sequential());
    let b = batch(&ctx, &kinds, ExecutionConfig::parallel(Some(3)));
    assert_eq!(a.realizations, b.realizations);
    for (x, y) in a.results.iter().zip(&b.results) {
        assert_eq!(x.report, y.report);
        assert_eq!(x.runs, y.runs);
    }
}

#[test]
fn spec_order_does_not_change_reports() {
    let ctx = small_batch_context();
    let a = batch(&ctx, &["classical", "online-tube"], ExecutionConfig::sequential());
    let b = batch(&ctx, &["online-tube", "classical"], ExecutionConfig::sequential());
    let by_label: HashMap<_, _> = b.results.iter().map(|r| (r.spec.label.clone(), &r.report)).collect();
    for r in &a.results {
        assert_eq!(&r.report, by_label[&r.spec.label]);
    }
}

#[test]
fn deviation_statistics_are_ordered() {
    let ctx = small_batch_context();
    let res = batch(&ctx, &["classical"], ExecutionConfig::sequential());
    let layout = ctx.nominal.layout();
    let r = &res.results[0];
    let paths: Vec<Vec<f64>> = r.runs.iter().map(|x| tube_nmpc::harness::s2_series(x, layout)).collect();
    let spread = (0..paths[0].len())
        .map(|t| {
            let v = paths.iter().map(|p| p[t]);
            v.clone().fold(f64::MIN, f64::max) - v.fold(f64::MAX, f64::min)
        })
        .fold(0.0, f64::max);
    let m = &r.report;
    assert!(m.sigma_bar_s2 <= m.sigma_max_s2);
    assert!(m.sigma_max_s2 <= spread + 1e-12);
    assert!(m.s2_max >= paths.iter().flatten().copied().fold(0.0, f64::max));
    for run in &r.runs {
        assert_eq!(run.realization_hash, res.realizations[run.realization.run_index as usize].hash());
    }
}

#[test]
fn metrics_csv_round_trips() {
    let ctx = small_batch_context();
    let res = batch(&ctx, &["classical"], ExecutionConfig::sequential());
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("m.csv");
    let reports: Vec<_> = res.results.iter().map(|r| &r.report).collect();
    output::write_metrics_csv(&path, &reports).unwrap();
    let mut rd = csv::Reader::from_path(&path).unwrap();
    let header: Vec<String> = rd.headers().unwrap().iter().map(str::to_string).collect();
    let row = rd.records().next().unwrap().unwrap();
    let get = |name: &str| row[header.iter().position(|h| h == name).unwrap()].parse::<f64>().unwrap();
    let m = reports[0];
    assert_eq!(get("sigma_bar_s2"), m.sigma_bar_s2);
    assert_eq!(get("s2_max"), m.s2_max);
    assert_eq!(get("rmse_qm"), m.rmse_rel[0]);
    assert_eq!(row.iter().map(str::to_string).collect::<Vec<_>>(), output::metrics_row(m));
}
