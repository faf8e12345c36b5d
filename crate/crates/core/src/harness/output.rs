//! Tidy CSV writers. Column order is fixed per schema version; floats use
//! the shortest round-trip representation so reruns are byte-identical.

use std::io::Write;
use std::path::Path;

use super::closed_loop::RunResult;
use super::metrics::MetricsReport;
use super::references::References;
use super::uncertainty::Realization;
use super::HarnessError;
use crate::model::StateLayout;
use crate::nlp::SolveStatus;

/// Bumped whenever a column is added, removed or reordered.
pub const CSV_SCHEMA_VERSION: u32 = 1;

fn io_err(path: &Path, e: impl std::fmt::Display) -> HarnessError {
    HarnessError::Io {
        path: path.to_path_buf(),
        message: e.to_string(),
    }
}

fn write_rows(path: &Path, header: &[String], rows: &[Vec<String>]) -> Result<(), HarnessError> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
    }
    let mut w = csv::Writer::from_path(path).map_err(|e| io_err(path, e))?;
    w.write_record(header).map_err(|e| io_err(path, e))?;
    for r in rows {
        w.write_record(r).map_err(|e| io_err(path, e))?;
    }
    w.flush().map_err(|e| io_err(path, e))
}

fn f(v: f64) -> String {
    format!("{v}")
}

fn opt(v: Option<f64>) -> String {
    v.map(f).unwrap_or_default()
}

fn status(s: Option<SolveStatus>) -> String {
    match s {
        Some(SolveStatus::Converged) => "converged",
        Some(SolveStatus::MaxIter) => "max_iter",
        Some(SolveStatus::Infeasible) => "infeasible",
        Some(SolveStatus::NonFinite) => "non_finite",
        None => "",
    }
    .to_string()
}

fn strs(v: &[&str]) -> Vec<String> {
    v.iter().map(|s| s.to_string()).collect()
}

pub fn run_header(layout: StateLayout) -> Vec<String> {
    let mut h = strs(&["run", "controller", "k", "t"]);
    h.extend(layout.state_names());
    h.extend(strs(&[
        "u",
        "qm",
        "ratio",
        "qm_meas",
        "ratio_meas",
        "qm_ref",
        "ratio_ref",
        "slack_max",
        "status",
        "nominal_status",
        "iterations",
        "fallback",
        "nu0",
    ]));
    h
}

fn run_rows(run: &RunResult) -> Vec<Vec<String>> {
    run.records
        .iter()
        .map(|r| {
            let mut row = vec![
                run.realization.run_index.to_string(),
                run.controller.name().to_string(),
                r.k.to_string(),
                f(r.t),
            ];
            row.extend(r.x.iter().copied().map(f));
            row.extend([
                opt(r.input),
                f(r.y_true.qm),
                f(r.y_true.ratio),
                f(r.y_meas.qm),
                f(r.y_meas.ratio),
                f(r.y_ref.qm),
                f(r.y_ref.ratio),
                f(r.slack_max),
                status(r.status),
                status(r.nominal_status),
                r.iterations.to_string(),
                u8::from(r.fallback).to_string(),
                opt(r.nu0),
            ]);
            row
        })
        .collect()
}

/// Control-grid log of one or more runs.
pub fn write_runs_csv(path: &Path, layout: StateLayout, runs: &[&RunResult]) -> Result<(), HarnessError> {
    let rows: Vec<Vec<String>> = runs.iter().flat_map(|r| run_rows(r)).collect();
    write_rows(path, &run_header(layout), &rows)
}

/// Substep-grid plant trajectory of one run.
pub fn write_trajectory_csv(path: &Path, layout: StateLayout, run: &RunResult) -> Result<(), HarnessError> {
    let mut h = strs(&["t"]);
    h.extend(layout.state_names());
    h.extend(strs(&["qm", "ratio"]));
    let tr = &run.trajectory;
    let rows = tr
        .times
        .iter()
        .zip(&tr.states)
        .zip(&tr.outputs)
        .map(|((t, x), y)| {
            let mut row = vec![f(*t)];
            row.extend(x.iter().copied().map(f));
            row.extend([f(y.qm), f(y.ratio)]);
            row
        })
        .collect::<Vec<_>>();
    write_rows(path, &h, &rows)
}

pub const METRICS_HEADER: [&str; 19] = [
    "label",
    "controller",
    "n_runs",
    "n_failed",
    "rmse_qm",
    "rmse_ratio",
    "rmse_qm_steady",
    "rmse_ratio_steady",
    "central_path",
    "sigma_bar_s2",
    "sigma_max_s2",
    "sigma_bar_s2_nominal",
    "sigma_max_s2_nominal",
    "s2_max",
    "ratio_max",
    "saturation_fraction",
    "slack_fraction",
    "infeasible_events",
    "fallbacks",
];

pub fn metrics_row(r: &MetricsReport) -> Vec<String> {
    vec![
        r.label.clone(),
        r.controller.name().to_string(),
        r.n_runs.to_string(),
        r.n_failed.to_string(),
        f(r.rmse_rel[0]),
        f(r.rmse_rel[1]),
        f(r.rmse_rel_steady[0]),
        f(r.rmse_rel_steady[1]),
        match r.central_path {
            super::CentralPath::CrossRunMean => "cross-run-mean",
            super::CentralPath::Nominal => "nominal",
        }
        .to_string(),
        f(r.sigma_bar_s2),
        f(r.sigma_max_s2),
        opt(r.sigma_bar_s2_nominal),
        opt(r.sigma_max_s2_nominal),
        f(r.s2_max),
        f(r.ratio_max),
        f(r.saturation_fraction),
        f(r.slack_fraction),
        r.infeasible_events.to_string(),
        r.fallbacks.to_string(),
    ]
}

pub fn write_metrics_csv(path: &Path, reports: &[&MetricsReport]) -> Result<(), HarnessError> {
    let rows: Vec<Vec<String>> = reports.iter().map(|r| metrics_row(r)).collect();
    write_rows(path, &strs(&METRICS_HEADER), &rows)
}

/// `d_ref` (mean flows per interval) and `y_ref` on the same control grid,
/// `n_steps + 1` rows each.
pub fn write_references(
    d_path: &Path,
    y_path: &Path,
    refs: &References,
    layout: StateLayout,
    feedstocks: &[String],
) -> Result<(), HarnessError> {
    let tc = refs.interval;
    let n = refs.n_steps;
    let mut dh = strs(&["k", "t"]);
    dh.extend(feedstocks.iter().cloned());
    let d_rows: Vec<Vec<String>> = (0..=n)
        .map(|k| {
            let t = k as f64 * tc;
            let mut row = vec![k.to_string(), f(t)];
            row.extend(refs.d_ref.delivered(t, t + tc).into_iter().map(|v| f(v / tc)));
            row
        })
        .collect();
    write_rows(d_path, &dh, &d_rows)?;
    let mut yh = strs(&["k", "t", "qm", "ratio", "u"]);
    yh.extend(layout.state_names());
    let y_rows: Vec<Vec<String>> = (0..=n)
        .map(|k| {
            let mut row = vec![
                k.to_string(),
                f(k as f64 * tc),
                f(refs.y_ref[k].qm),
                f(refs.y_ref[k].ratio),
                f(refs.u_ref[k]),
            ];
            row.extend(refs.x_ref[k].iter().copied().map(f));
            row
        })
        .collect();
    write_rows(y_path, &yh, &y_rows)
}

/// Seeds and sampled values of every run, for audit.
pub fn write_realizations_csv(path: &Path, realizations: &[Realization]) -> Result<(), HarnessError> {
    let h = strs(&[
        "run",
        "hash",
        "mu_max1",
        "mu_max2",
        "ks1",
        "ks2",
        "ki2",
        "knockdown_center",
        "knockdown_duration",
        "knockdown_amplitude",
        "knockdown_ramp",
        "noise_seed",
        "noise_std_qm",
        "noise_std_ratio",
    ]);
    let rows: Vec<Vec<String>> = realizations
        .iter()
        .map(|r| {
            let mut row = vec![r.run_index.to_string(), r.hash()];
            row.extend(r.kinetics.iter().copied().map(f));
            match &r.knockdown {
                Some(k) => row.extend([f(k.center), f(k.duration), f(k.amplitude), f(k.ramp)]),
                None => row.extend(std::iter::repeat_n(String::new(), 4)),
            }
            row.push(r.noise_seed.to_string());
            row.extend(r.noise_rel_std.iter().copied().map(f));
            row
        })
        .collect();
    write_rows(path, &h, &rows)
}

/// Write `bytes` to `path` via a temporary sibling and a rename.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), HarnessError> {
    let dir = path.parent().filter(|d| !d.as_os_str().is_empty()).unwrap_or(Path::new("."));
    std::fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
    let tmp = dir.join(format!(
        ".{}.tmp",
        path.file_name().and_then(|s| s.to_str()).unwrap_or("out")
    ));
    let mut file = std::fs::File::create(&tmp).map_err(|e| io_err(&tmp, e))?;
    file.write_all(bytes).map_err(|e| io_err(&tmp, e))?;
    file.sync_all().map_err(|e| io_err(&tmp, e))?;
    std::fs::rename(&tmp, path).map_err(|e| io_err(path, e))
}
