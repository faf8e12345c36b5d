//! Tracking and robustness statistics of a Monte-Carlo batch.

use serde::Serialize;

use crate::controllers::{ConstraintSets, ControllerKind};
use crate::model::{OutputVector, StateLayout, N_OUTPUTS};
use crate::nlp::SolveStatus;

use super::closed_loop::RunResult;
use super::uncertainty::KnockdownWindow;

/// Slack values at or below this (state-scaled) count as unused.
const SLACK_USED: f64 = 1e-6;

/// Control-grid series of one run, reduced to what the metrics need.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct RunSeries {
    pub t: Vec<f64>,
    pub s2: Vec<f64>,
    /// Measured outputs; RMSE is computed on these.
    pub y_meas: Vec<OutputVector>,
    pub y_true: Vec<OutputVector>,
    pub inputs: Vec<f64>,
    pub slack_max: Vec<f64>,
    pub status: Vec<Option<SolveStatus>>,
    pub nominal_status: Vec<Option<SolveStatus>>,
    pub fallback: Vec<bool>,
    pub knockdown: Option<KnockdownWindow>,
}

impl RunSeries {
    pub fn from_run(run: &RunResult, layout: StateLayout) -> Self {
        let r = &run.records;
        let steps = r.iter().filter(|c| c.input.is_some());
        Self {
            t: r.iter().map(|c| c.t).collect(),
            s2: r.iter().map(|c| c.x[layout.s2()]).collect(),
            y_meas: r.iter().map(|c| c.y_meas).collect(),
            y_true: r.iter().map(|c| c.y_true).collect(),
            inputs: steps.clone().filter_map(|c| c.input).collect(),
            slack_max: steps.clone().map(|c| c.slack_max).collect(),
            status: steps.clone().map(|c| c.status).collect(),
            nominal_status: steps.clone().map(|c| c.nominal_status).collect(),
            fallback: steps.map(|c| c.fallback).collect(),
            knockdown: run.realization.knockdown,
        }
    }
}

/// S2 on the control grid.
pub fn s2_series(run: &RunResult, layout: StateLayout) -> Vec<f64> {
    run.records.iter().map(|c| c.x[layout.s2()]).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum CentralPath {
    /// Pointwise mean of S2 across runs.
    CrossRunMean,
    /// The controller's zero-uncertainty trajectory.
    Nominal,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MetricsReport {
    pub label: String,
    pub controller: ControllerKind,
    pub n_runs: usize,
    pub n_failed: usize,
    /// Run indices entering the statistics.
    pub runs: Vec<u64>,
    /// Relative RMSE per output, %, averaged over runs.
    pub rmse_rel: [f64; N_OUTPUTS],
    /// Same, restricted to the steady diet phases.
    pub rmse_rel_steady: [f64; N_OUTPUTS],
    pub central_path: CentralPath,
    pub sigma_bar_s2: f64,
    pub sigma_max_s2: f64,
    /// Deviations from the nominal trajectory, when one was supplied.
    pub sigma_bar_s2_nominal: Option<f64>,
    pub sigma_max_s2_nominal: Option<f64>,
    pub s2_max: f64,
    pub ratio_max: f64,
    /// Fraction of steps with the input on a bound of U.
    pub saturation_fraction: f64,
    /// Fraction of steps outside the knockdown window with any nonzero slack.
    pub slack_fraction: f64,
    /// Steps with an infeasible solve or without a usable solution.
    pub infeasible_events: usize,
    pub fallbacks: usize,
}

/// Inputs shared by every run of a batch.
#[derive(Debug, Clone, Copy)]
pub struct MetricsContext<'a> {
    pub y_ref: &'a [OutputVector],
    /// Control-grid mask of the steady diet phases.
    pub steady: &'a [bool],
    pub sets: &'a ConstraintSets,
}

fn rmse(y: &[OutputVector], y_ref: &[OutputVector], ybar: [f64; N_OUTPUTS], mask: Option<&[bool]>) -> [f64; N_OUTPUTS] {
    let mut out = [0.0; N_OUTPUTS];
    for (j, o) in out.iter_mut().enumerate() {
        let mut acc = 0.0;
        let mut n = 0usize;
        for (t, (a, b)) in y.iter().zip(y_ref).enumerate() {
            if mask.is_some_and(|m| !m.get(t).copied().unwrap_or(false)) {
                continue;
            }
            let e = (a.as_array()[j] - b.as_array()[j]) / ybar[j];
            acc += e * e;
            n += 1;
        }
        *o = if n == 0 { 0.0 } else { 100.0 * (acc / n as f64).sqrt() };
    }
    out
}

fn time_mean(y: &[OutputVector]) -> [f64; N_OUTPUTS] {
    let mut m = [0.0; N_OUTPUTS];
    for v in y {
        for (a, b) in m.iter_mut().zip(v.as_array()) {
            *a += b;
        }
    }
    m.map(|a| a / y.len().max(1) as f64)
}

fn deviations(series: &[&[f64]], center: &[f64]) -> (f64, f64) {
    let (mut sum, mut max, mut n) = (0.0, 0.0f64, 0usize);
    for s in series {
        for (a, c) in s.iter().zip(center) {
            let d = (a - c).abs();
            sum += d;
            max = max.max(d);
            n += 1;
        }
    }
    (if n == 0 { 0.0 } else { sum / n as f64 }, max)
}

/// Statistics over the successful runs in `series`; `n_failed` runs were
/// excluded upstream.
pub fn compute_metrics(
    label: &str,
    controller: ControllerKind,
    series: &[(u64, RunSeries)],
    n_failed: usize,
    ctx: MetricsContext,
    nominal_s2: Option<&[f64]>,
) -> MetricsReport {
    let ok: Vec<&(u64, RunSeries)> = series.iter().collect();
    let n = ok.len();
    let ybar = time_mean(ctx.y_ref);
    let mut report = MetricsReport {
        label: label.to_string(),
        controller,
        n_runs: n + n_failed,
        n_failed,
        runs: ok.iter().map(|(i, _)| *i).collect(),
        rmse_rel: [0.0; N_OUTPUTS],
        rmse_rel_steady: [0.0; N_OUTPUTS],
        central_path: CentralPath::CrossRunMean,
        sigma_bar_s2: 0.0,
        sigma_max_s2: 0.0,
        sigma_bar_s2_nominal: None,
        sigma_max_s2_nominal: None,
        s2_max: 0.0,
        ratio_max: 0.0,
        saturation_fraction: 0.0,
        slack_fraction: 0.0,
        infeasible_events: 0,
        fallbacks: 0,
    };
    if n == 0 {
        return report;
    }
    for (_, s) in &ok {
        let len = s.y_meas.len().min(ctx.y_ref.len());
        let r = rmse(&s.y_meas[..len], &ctx.y_ref[..len], ybar, None);
        let rs = rmse(&s.y_meas[..len], &ctx.y_ref[..len], ybar, Some(ctx.steady));
        for j in 0..N_OUTPUTS {
            report.rmse_rel[j] += r[j] / n as f64;
            report.rmse_rel_steady[j] += rs[j] / n as f64;
        }
    }

    let len = ok.iter().map(|(_, s)| s.s2.len()).min().unwrap_or(0);
    let paths: Vec<&[f64]> = ok.iter().map(|(_, s)| &s.s2[..len]).collect();
    let central: Vec<f64> = (0..len)
        .map(|t| paths.iter().map(|p| p[t]).sum::<f64>() / n as f64)
        .collect();
    (report.sigma_bar_s2, report.sigma_max_s2) = deviations(&paths, &central);
    if let Some(z) = nominal_s2 {
        let m = len.min(z.len());
        let cut: Vec<&[f64]> = paths.iter().map(|p| &p[..m]).collect();
        let (a, b) = deviations(&cut, &z[..m]);
        report.sigma_bar_s2_nominal = Some(a);
        report.sigma_max_s2_nominal = Some(b);
    }
    report.s2_max = ok.iter().flat_map(|(_, s)| s.s2.iter().copied()).fold(0.0, f64::max);
    report.ratio_max = ok
        .iter()
        .flat_map(|(_, s)| s.y_true.iter().map(|y| y.ratio))
        .fold(0.0, f64::max);

    let (mut steps, mut sat, mut outside, mut slack) = (0usize, 0usize, 0usize, 0usize);
    for (_, s) in &ok {
        for (k, u) in s.inputs.iter().enumerate() {
            steps += 1;
            sat += usize::from(ctx.sets.at_input_bound(*u));
            let in_window = s
                .knockdown
                .is_some_and(|w| w.duration > 0.0 && s.t[k] + 1e-12 >= w.start() && s.t[k] < w.end());
            if !in_window {
                outside += 1;
                slack += usize::from(s.slack_max[k] > SLACK_USED);
            }
            let infeasible = [s.status[k], s.nominal_status[k]].contains(&Some(SolveStatus::Infeasible));
            report.infeasible_events += usize::from(infeasible || s.fallback[k]);
            report.fallbacks += usize::from(s.fallback[k]);
        }
    }
    report.saturation_fraction = sat as f64 / steps.max(1) as f64;
    report.slack_fraction = slack as f64 / outside.max(1) as f64;
    report
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sets() -> ConstraintSets {
        ConstraintSets {
            x_lb: vec![],
            x_ub: vec![],
            u_lb: 0.0,
            u_ub: 1.0,
            du_lb: -1.0,
            du_ub: 1.0,
        }
    }

    fn series(s2: &[f64], y: &[(f64, f64)], u: &[f64]) -> RunSeries {
        let y: Vec<OutputVector> = y.iter().map(|&(qm, ratio)| OutputVector { qm, ratio }).collect();
        RunSeries {
            t: (0..s2.len()).map(|k| k as f64).collect(),
            s2: s2.to_vec(),
            y_meas: y.clone(),
            y_true: y,
            inputs: u.to_vec(),
            slack_max: vec![0.0; u.len()],
            status: vec![Some(SolveStatus::Converged); u.len()],
            nominal_status: vec![None; u.len()],
            fallback: vec![false; u.len()],
            knockdown: None,
        }
    }

    // Three toy runs with hand-computed statistics.
    #[test]
    fn toy_trajectories() {
        let y_ref: Vec<OutputVector> = [(2.0, 1.0), (2.0, 1.0), (2.0, 1.0)]
            .iter()
            .map(|&(qm, ratio)| OutputVector { qm, ratio })
            .collect();
        let steady = vec![true, true, false];
        let s = sets();
        let ctx = MetricsContext {
            y_ref: &y_ref,
            steady: &steady,
            sets: &s,
        };
        let runs = vec![
            (0, series(&[1.0, 2.0, 3.0], &[(2.0, 1.0), (2.0, 1.0), (2.0, 1.0)], &[0.5, 1.0])),
            (1, series(&[3.0, 2.0, 1.0], &[(4.0, 1.0), (2.0, 1.0), (2.0, 1.0)], &[0.5, 0.5])),
            (2, series(&[2.0, 2.0, 8.0], &[(2.0, 1.0), (2.0, 1.0), (0.0, 1.5)], &[0.0, 0.5])),
        ];
        let r = compute_metrics("toy", ControllerKind::Classical, &runs, 1, ctx, Some(&[2.0, 2.0, 3.0]));
        // central path (2, 2, 4); |dev| = (1,0,1), (1,0,3), (0,0,4)
        assert_eq!(r.sigma_bar_s2, 10.0 / 9.0);
        assert_eq!(r.sigma_max_s2, 4.0);
        // against (2, 2, 3): (1,0,0), (1,0,2), (0,0,5)
        assert_eq!(r.sigma_bar_s2_nominal, Some(1.0));
        assert_eq!(r.sigma_max_s2_nominal, Some(5.0));
        assert_eq!(r.s2_max, 8.0);
        assert_eq!(r.ratio_max, 1.5);
        // run 1: qm error 1 at one of three points -> 100 sqrt(1/3); run 2: same
        let e = 100.0 * (1.0f64 / 3.0).sqrt();
        assert!((r.rmse_rel[0] - 2.0 * e / 3.0).abs() < 1e-12);
        // ratio: run 2 has 0.5 at one point
        assert!((r.rmse_rel[1] - e * 0.5 / 3.0).abs() < 1e-12);
        // steady mask drops the last point: only run 1 has error, 100 sqrt(1/2)
        assert!((r.rmse_rel_steady[0] - 100.0 * 0.5f64.sqrt() / 3.0).abs() < 1e-12);
        assert_eq!(r.rmse_rel_steady[1], 0.0);
        assert_eq!(r.saturation_fraction, 2.0 / 6.0);
        assert_eq!((r.n_runs, r.n_failed, r.runs.clone()), (4, 1, vec![0, 1, 2]));
    }

    #[test]
    fn symmetric_pair_and_identical_runs() {
        let y_ref = vec![OutputVector { qm: 1.0, ratio: 1.0 }; 4];
        let steady = vec![true; 4];
        let s = sets();
        let ctx = MetricsContext {
            y_ref: &y_ref,
            steady: &steady,
            sets: &s,
        };
        let y = [(1.0, 1.0); 4];
        let a = 0.75;
        let pair = vec![
            (0, series(&[5.0 + a; 4], &y, &[0.5; 3])),
            (1, series(&[5.0 - a; 4], &y, &[0.5; 3])),
        ];
        let r = compute_metrics("pair", ControllerKind::Classical, &pair, 0, ctx, None);
        assert_eq!((r.sigma_bar_s2, r.sigma_max_s2), (a, a));
        assert_eq!(r.rmse_rel, [0.0, 0.0]);
        let same = vec![(0, series(&[1.0, 4.0, 2.0, 3.0], &y, &[0.5; 3])); 3];
        let r = compute_metrics("same", ControllerKind::Classical, &same, 0, ctx, None);
        assert_eq!((r.sigma_bar_s2, r.sigma_max_s2), (0.0, 0.0));
    }
}
