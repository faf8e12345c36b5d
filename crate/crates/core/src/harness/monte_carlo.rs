//! Paired Monte-Carlo batches: realization `i` is drawn once and shared by
//! every controller.

use serde::Serialize;

use crate::controllers::ControllerKind;
use crate::parallel::{self, ExecutionConfig};

use super::closed_loop::{run_controller, RunResult};
use super::metrics::{compute_metrics, s2_series, MetricsContext, MetricsReport, RunSeries};
use super::scenario::{ScenarioContext, WeightsConfig};
use super::uncertainty::Realization;
use super::HarnessError;

/// A controller to evaluate, optionally with its own ancillary/tracking
/// weights.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ControllerSpec {
    pub label: String,
    pub kind: ControllerKind,
    pub weights: Option<WeightsConfig>,
}

impl ControllerSpec {
    pub fn new(kind: ControllerKind) -> Self {
        Self {
            label: kind.name().to_string(),
            kind,
            weights: None,
        }
    }

    /// Same controller with a named weight preset.
    pub fn with_preset(kind: ControllerKind, preset: &str) -> Self {
        Self {
            label: format!("{}:{preset}", kind.name()),
            kind,
            weights: Some(WeightsConfig {
                preset: Some(preset.to_string()),
                ..WeightsConfig::default()
            }),
        }
    }

    /// `kind` or `kind:preset`.
    pub fn parse(s: &str) -> Option<Self> {
        let (kind, preset) = match s.split_once(':') {
            Some((k, p)) => (k, Some(p)),
            None => (s, None),
        };
        let kind = ControllerKind::parse(kind.trim())?;
        Some(match preset {
            Some(p) => Self::with_preset(kind, p.trim()),
            None => Self::new(kind),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SpecResult {
    pub spec: ControllerSpec,
    pub report: MetricsReport,
    /// One entry per run index, failed runs included.
    pub runs: Vec<RunResult>,
    /// Zero-uncertainty run of the same controller.
    pub nominal: Option<RunResult>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MonteCarloResult {
    pub realizations: Vec<Realization>,
    pub results: Vec<SpecResult>,
}

/// Output-weight diagonals of the tracking-cost sweep, `[q_M, CO2/CH4]`.
pub const WY_SWEEP: [[f64; 2]; 7] = [
    [0.0, 1.0],
    [0.1, 0.9],
    [0.25, 0.75],
    [0.5, 0.5],
    [0.75, 0.25],
    [0.9, 0.1],
    [1.0, 0.0],
];

/// One spec per `(kind, W_y)` pair, other weights taken from `base`.
pub fn wy_sweep_specs(kinds: &[ControllerKind], base: &WeightsConfig) -> Vec<ControllerSpec> {
    kinds
        .iter()
        .flat_map(|&kind| {
            WY_SWEEP.iter().map(move |wy| ControllerSpec {
                label: format!("{}:wy={},{}", kind.name(), wy[0], wy[1]),
                kind,
                weights: Some(WeightsConfig { wy: *wy, ..base.clone() }),
            })
        })
        .collect()
}

/// Context with the spec's weights in place of the scenario's.
fn spec_context(base: &ScenarioContext, spec: &ControllerSpec) -> Result<Option<ScenarioContext>, HarnessError> {
    spec.weights.as_ref().map(|w| base.with_weights(w.clone())).transpose()
}

/// Grid mask of the steady diet phases.
pub(crate) fn steady_mask(ctx: &ScenarioContext) -> Vec<bool> {
    let tc = ctx.references.interval;
    let windows = ctx.scenario.diet.steady_windows();
    (0..=ctx.n_steps())
        .map(|k| {
            let t = k as f64 * tc;
            windows.iter().any(|(a, b)| t >= a - 1e-9 && t <= b + 1e-9)
        })
        .collect()
}

/// Metrics of a single run (spread statistics are zero).
pub fn run_metrics(ctx: &ScenarioContext, label: &str, run: &RunResult) -> MetricsReport {
    let layout = ctx.nominal.layout();
    let steady = steady_mask(ctx);
    let ok: Vec<(u64, RunSeries)> = if run.succeeded() {
        vec![(run.realization.run_index, RunSeries::from_run(run, layout))]
    } else {
        Vec::new()
    };
    let mctx = MetricsContext {
        y_ref: &ctx.references.y_ref[..=ctx.n_steps()],
        steady: &steady,
        sets: &ctx.sets,
    };
    compute_metrics(label, run.controller, &ok, usize::from(!run.succeeded()), mctx, None)
}

/// Run every spec on the same `n_runs` realizations (plus one nominal run
/// each) and reduce the results in run-index order.
pub fn monte_carlo(
    ctx: &ScenarioContext,
    specs: &[ControllerSpec],
    exec: ExecutionConfig,
    with_nominal: bool,
) -> Result<MonteCarloResult, HarnessError> {
    let n_runs = ctx.scenario.uncertainty.n_runs;
    let realizations: Vec<Realization> = (0..n_runs as u64).map(|i| ctx.realization(i)).collect();
    let own: Vec<Option<ScenarioContext>> = specs.iter().map(|s| spec_context(ctx, s)).collect::<Result<_, _>>()?;
    let contexts: Vec<&ScenarioContext> = own.iter().map(|c| c.as_ref().unwrap_or(ctx)).collect();

    // Shared precomputations happen once, before the runs fan out.
    for (spec, c) in specs.iter().zip(&contexts) {
        match spec.kind {
            ControllerKind::OfflineTube => {
                c.offline_store()?;
            }
            ControllerKind::OverridePi => {
                c.pi_tuning()?;
            }
            _ => {}
        }
    }

    let nominal = Realization::nominal(&ctx.nominal.params);
    let mut items: Vec<(usize, Option<usize>)> = Vec::new();
    for s in 0..specs.len() {
        items.extend((0..n_runs).map(|r| (s, Some(r))));
        if with_nominal {
            items.push((s, None));
        }
    }
    let outcomes = parallel::map(exec, items.clone(), |(s, r)| {
        let real = r.map_or(&nominal, |r| &realizations[r]);
        run_controller(contexts[s], specs[s].kind, real)
    });

    let layout = ctx.nominal.layout();
    let steady = steady_mask(ctx);
    let mut per_spec: Vec<(Vec<RunResult>, Option<RunResult>)> = specs.iter().map(|_| (Vec::new(), None)).collect();
    for ((s, r), out) in items.into_iter().zip(outcomes) {
        let run = out?;
        match r {
            Some(_) => per_spec[s].0.push(run),
            None => per_spec[s].1 = Some(run),
        }
    }

    let mut results = Vec::with_capacity(specs.len());
    for ((spec, c), (runs, nom)) in specs.iter().zip(&contexts).zip(per_spec) {
        let ok: Vec<(u64, RunSeries)> = runs
            .iter()
            .filter(|r| r.succeeded())
            .map(|r| (r.realization.run_index, RunSeries::from_run(r, layout)))
            .collect();
        let failed = runs.len() - ok.len();
        let nominal_s2 = nom.as_ref().filter(|r| r.succeeded()).map(|r| s2_series(r, layout));
        let mctx = MetricsContext {
            y_ref: &c.references.y_ref[..=c.n_steps()],
            steady: &steady,
            sets: &c.sets,
        };
        let report = compute_metrics(&spec.label, spec.kind, &ok, failed, mctx, nominal_s2.as_deref());
        results.push(SpecResult {
            spec: spec.clone(),
            report,
            runs,
            nominal: nom,
        });
    }
    Ok(MonteCarloResult { realizations, results })
}
