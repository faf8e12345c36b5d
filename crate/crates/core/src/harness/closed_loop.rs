//! Plant-controller loop: the controller reads the true plant state once
//! per interval, the plant integrates the held input with its own
//! (perturbed) parameters.

use serde::Serialize;

use crate::controllers::{Controller, ControllerKind, StepInput};
use crate::integrator::{simulate_interval, FeedKind, FeedSchedule, SimTrajectory};
use crate::model::{Digester, KineticParams, OutputVector, ProcessModel};
use crate::nlp::SolveStatus;

use super::references::{default_guess, equilibrium, FeedingMode};
use super::scenario::{PlantStart, ScenarioContext};
use super::uncertainty::{apply_noise, KnockdownWindow, Realization};
use super::HarnessError;

/// True plant: the digester with sampled kinetics and an optional
/// time-varying reduction of `mu_max2`.
#[derive(Debug, Clone)]
pub struct PlantModel {
    pub digester: Digester,
    pub knockdown: Option<KnockdownWindow>,
}

impl PlantModel {
    pub fn new(nominal: &Digester, realization: &Realization) -> Self {
        let mut digester = nominal.clone();
        digester.params = nominal.params.with_kinetic_subset(realization.kinetics);
        Self {
            digester,
            knockdown: realization.knockdown,
        }
    }

    fn factor(&self, t: f64) -> f64 {
        self.knockdown.map_or(1.0, |k| k.factor(t))
    }

    fn with_factor<R>(&self, t: f64, f: impl FnOnce(&Digester) -> R) -> R {
        let a = self.factor(t);
        if a == 1.0 {
            return f(&self.digester);
        }
        let d = Digester {
            config: self.digester.config.clone(),
            params: KineticParams {
                mu_max2: self.digester.params.mu_max2 * a,
                ..self.digester.params.clone()
            },
        };
        f(&d)
    }
}

impl ProcessModel for PlantModel {
    fn n_states(&self) -> usize {
        self.digester.n_states()
    }
    fn n_flows(&self) -> usize {
        self.digester.n_flows()
    }
    fn rhs(&self, t: f64, x: &[f64], flows: &[f64], dx: &mut [f64]) {
        self.with_factor(t, |d| d.rhs(t, x, flows, dx))
    }
    fn jacobian(&self, t: f64, x: &[f64], flows: &[f64], jx: &mut [f64], ju: &mut [f64]) {
        self.with_factor(t, |d| d.jacobian(t, x, flows, jx, ju))
    }
    fn outputs(&self, t: f64, x: &[f64]) -> OutputVector {
        self.with_factor(t, |d| d.outputs(t, x))
    }
    fn output_jacobian(&self, t: f64, x: &[f64], jy: &mut [f64]) {
        self.with_factor(t, |d| d.output_jacobian(t, x, jy))
    }
}

/// Known schedule over `[t0, t1)` with the manipulated flow replaced by
/// the constant `u`.
pub fn schedule_with_input(d_ref: &FeedSchedule, control_index: usize, t0: f64, t1: f64, u: f64) -> FeedSchedule {
    let mut s = d_ref.window(t0, t1);
    for e in s.entries.iter_mut() {
        e.flows[control_index] = 0.0;
    }
    let mut f = vec![0.0; s.n_flows];
    f[control_index] = u;
    s.push(t0, t1 - t0, f, FeedKind::Continuous);
    s
}

/// One control step as logged.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ControlRecord {
    pub k: usize,
    pub t: f64,
    pub x: Vec<f64>,
    pub y_true: OutputVector,
    pub y_meas: OutputVector,
    pub y_ref: OutputVector,
    /// Applied manipulated flow over `[t, t + Tc)`; `None` on the final row.
    pub input: Option<f64>,
    pub status: Option<SolveStatus>,
    pub nominal_status: Option<SolveStatus>,
    pub iterations: usize,
    pub fallback: bool,
    pub slack_max: f64,
    pub nu0: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum RunFailure {
    /// The plant state became non-finite.
    Simulation { step: usize, message: String },
    /// Too many consecutive solver failures.
    SolverAbort { step: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunResult {
    pub controller: ControllerKind,
    pub realization: Realization,
    pub realization_hash: String,
    /// Control-grid log, `n_steps + 1` rows on success.
    pub records: Vec<ControlRecord>,
    /// Substep-grid plant trajectory.
    pub trajectory: SimTrajectory,
    pub failure: Option<RunFailure>,
}

impl RunResult {
    pub fn succeeded(&self) -> bool {
        self.failure.is_none()
    }

    pub fn inputs(&self) -> Vec<f64> {
        self.records.iter().filter_map(|r| r.input).collect()
    }
}

/// Plant initial state: the nominal one, or the plant's own steady state
/// under the first diet phase (after the periodic warm-up in impulsive
/// mode).
pub fn plant_initial_state(ctx: &ScenarioContext, plant: &PlantModel) -> Result<Vec<f64>, HarnessError> {
    let refs = &ctx.references;
    if ctx.scenario.plant_start == PlantStart::Nominal || plant.digester.params == ctx.nominal.params {
        return Ok(refs.x0().to_vec());
    }
    let eq = &refs.equilibria[0];
    let guess = if eq.x.iter().all(|v| v.is_finite()) {
        eq.x.clone()
    } else {
        default_guess(eq.x.len())
    };
    let mut x = equilibrium(&plant.digester, &eq.flows, &guess)?;
    let f = &ctx.scenario.feeding;
    if f.mode == FeedingMode::Impulsive {
        let warm = (f.warmup_days / 7.0).ceil() * 7.0;
        let h = refs.interval / refs.substeps as f64;
        x = simulate_interval(&plant.digester, &x, &refs.d_ref, -warm, 0.0, h)?
            .final_state()
            .to_vec();
    }
    Ok(x)
}

/// Run `controller` against the plant of `realization` over the scenario.
pub fn run_closed_loop(
    ctx: &ScenarioContext,
    controller: &mut dyn Controller,
    realization: &Realization,
) -> Result<RunResult, HarnessError> {
    let refs = &ctx.references;
    let plant = PlantModel::new(&ctx.nominal, realization);
    let ci = ctx.control_index;
    let tc = refs.interval;
    let h = tc / refs.substeps as f64;
    let sets = &ctx.sets;
    let max_fail = ctx.scenario.controller.max_consecutive_failures.max(1);
    let mut x = plant_initial_state(ctx, &plant)?;
    let mut result = RunResult {
        controller: controller.kind(),
        realization_hash: realization.hash(),
        realization: realization.clone(),
        records: Vec::with_capacity(refs.n_steps + 1),
        trajectory: SimTrajectory::default(),
        failure: None,
    };
    let measure = |k: usize, t: f64, x: &[f64]| {
        let y = plant.outputs(t, x);
        (y, apply_noise(y, realization.noise_rel_std, realization.noise_seed, k as u64))
    };
    let mut previous = controller.previous_input();
    let mut failures = 0;
    for k in 0..refs.n_steps {
        let t = k as f64 * tc;
        let (y_true, y_meas) = measure(k, t, &x);
        let rep = controller.step(&StepInput { k, t, x: &x, y_meas })?;
        let u = rep.input;
        let tol = 1e-9;
        let move_ok = controller.kind() == ControllerKind::OpenLoop
            || (u - previous >= sets.du_lb - tol && u - previous <= sets.du_ub + tol);
        if !(u >= sets.u_lb - tol && u <= sets.u_ub + tol && move_ok) {
            return Err(HarnessError::ConstraintViolation {
                step: k,
                input: u,
                previous,
            });
        }
        result.records.push(ControlRecord {
            k,
            t,
            x: x.clone(),
            y_true,
            y_meas,
            y_ref: refs.y_ref[k],
            input: Some(u),
            status: rep.status,
            nominal_status: rep.nominal_status,
            iterations: rep.iterations,
            fallback: rep.fallback,
            slack_max: rep.slack_max,
            nu0: rep.nu0,
        });
        failures = if rep.fallback { failures + 1 } else { 0 };
        if failures >= max_fail {
            result.failure = Some(RunFailure::SolverAbort { step: k });
            return Ok(result);
        }
        previous = u;
        let sched = schedule_with_input(&refs.d_ref, ci, t, t + tc, u);
        let tr = match simulate_interval(&plant, &x, &sched, t, t + tc, h) {
            Ok(tr) => tr,
            Err(e) => {
                result.failure = Some(RunFailure::Simulation {
                    step: k,
                    message: e.to_string(),
                });
                return Ok(result);
            }
        };
        append(&mut result.trajectory, tr);
        x = result.trajectory.final_state().to_vec();
    }
    let n = refs.n_steps;
    let t = n as f64 * tc;
    let (y_true, y_meas) = measure(n, t, &x);
    result.records.push(ControlRecord {
        k: n,
        t,
        x,
        y_true,
        y_meas,
        y_ref: refs.y_ref[n],
        input: None,
        status: None,
        nominal_status: None,
        iterations: 0,
        fallback: false,
        slack_max: 0.0,
        nu0: None,
    });
    Ok(result)
}

fn append(acc: &mut SimTrajectory, tr: SimTrajectory) {
    let skip = usize::from(!acc.times.is_empty());
    acc.times.extend_from_slice(&tr.times[skip..]);
    acc.states.extend(tr.states.into_iter().skip(skip));
    acc.outputs.extend_from_slice(&tr.outputs[skip..]);
    acc.inputs_applied.extend(tr.inputs_applied);
    acc.clamped += tr.clamped;
}

/// Build the controller and run it; controller construction errors are
/// returned, run failures are recorded in the result.
pub fn run_controller(
    ctx: &ScenarioContext,
    kind: ControllerKind,
    realization: &Realization,
) -> Result<RunResult, HarnessError> {
    let mut c = ctx.controller(kind)?;
    run_closed_loop(ctx, c.as_mut(), realization)
}
