use std::sync::Arc;

use crate::integrator::FeedSchedule;
use crate::model::{Digester, OutputVector};
use crate::nlp::{
    solve, transcribe, CostSpec, DecodedSolution, InitialStateDof, NlpSolution, OcpSpec, SlackConfig, SolveStatus,
    SolverOptions, Transcription,
};

use super::{ConstraintSets, Controller, ControllerError, ControllerKind, CostWeights, StepInput, StepReport};

/// Prediction model, horizons and references shared by every NMPC problem
/// of a scenario.
#[derive(Debug, Clone)]
pub struct NmpcSetup {
    pub model: Digester,
    pub interval: f64,
    pub substeps: usize,
    pub horizon: usize,
    pub control_horizon: usize,
    pub control_index: usize,
    pub d_ref: FeedSchedule,
    /// Output references on the control grid, `y_ref[k]` at `t = k Tc`.
    /// Indices past the end reuse the last entry.
    pub y_ref: Vec<OutputVector>,
    pub state_scale: Vec<f64>,
    pub input_scale: f64,
    pub state_guess: Vec<f64>,
    pub solver: SolverOptions,
    pub slack_weight: f64,
}

/// Solved problem with its decoded trajectories.
pub struct OcpOutcome {
    pub solution: NlpSolution,
    pub decoded: DecodedSolution,
    pub transcription: Transcription,
    pub usable: bool,
}

impl OcpOutcome {
    pub fn slack_max(&self, scale: &[f64]) -> f64 {
        self.decoded
            .slacks
            .iter()
            .flat_map(|s| s.iter().zip(scale).map(|(v, xs)| v / xs))
            .fold(0.0, f64::max)
    }
}

impl NmpcSetup {
    pub fn n_states(&self) -> usize {
        self.model.config.n_states()
    }

    /// References at stages `k+1 ..= k+Hp`.
    pub fn references(&self, k: usize) -> Vec<OutputVector> {
        let last = self.y_ref.len() - 1;
        (1..=self.horizon).map(|j| self.y_ref[(k + j).min(last)]).collect()
    }

    pub fn slack_config(&self) -> SlackConfig {
        SlackConfig {
            weight: self.slack_weight,
            states: vec![true; self.n_states()],
        }
    }

    pub fn ocp(
        &self,
        k: usize,
        x0: &[f64],
        sets: &ConstraintSets,
        previous: Option<f64>,
        cost: CostSpec,
        slack: bool,
    ) -> OcpSpec {
        OcpSpec {
            model: self.model.clone(),
            horizon: self.horizon,
            control_horizon: self.control_horizon,
            interval: self.interval,
            substeps: self.substeps,
            t0: k as f64 * self.interval,
            x0: x0.to_vec(),
            control_index: self.control_index,
            known_disturbance: self
                .d_ref
                .window(k as f64 * self.interval, (k + self.horizon) as f64 * self.interval),
            reference: self.references(k),
            cost,
            state_lb: sets.x_lb.clone(),
            state_ub: sets.x_ub.clone(),
            input_lb: sets.u_lb,
            input_ub: sets.u_ub,
            du_lb: sets.du_lb,
            du_ub: sets.du_ub,
            previous_input: previous,
            slack: slack.then(|| self.slack_config()),
            initial_state_dof: None::<InitialStateDof>,
            state_scale: self.state_scale.clone(),
            input_scale: self.input_scale,
            state_guess: self.state_guess.clone(),
        }
    }

    /// Solve from the shifted previous controls when given, then from the
    /// held previous input, then cold. Stops at the first usable solution.
    pub fn solve(
        &self,
        ocp: &OcpSpec,
        warm: Option<&[f64]>,
        z0_guess: Option<&[f64]>,
    ) -> Result<OcpOutcome, ControllerError> {
        let (problem, tr) = transcribe(ocp)?;
        let hc = ocp.control_horizon;
        let (lo, hi) = first_move_bounds(ocp);
        let mut starts: Vec<Option<Vec<f64>>> = Vec::new();
        if let Some(w) = warm {
            starts.push(Some(tr.simulated_guess(&clamped_controls(w, hc, ocp, lo, hi), z0_guess)));
        }
        if let Some(prev) = ocp.previous_input {
            let held = vec![prev.clamp(lo, hi); hc];
            starts.push(Some(tr.simulated_guess(&held, z0_guess)));
        }
        starts.push(None);
        let mut best: Option<NlpSolution> = None;
        for start in &starts {
            let s = solve(&problem, start.as_deref(), &self.solver);
            let ok = usable(&s, self.solver.tol);
            let better = best.as_ref().is_none_or(|b| s.primal_infeasibility < b.primal_infeasibility);
            if ok || better {
                best = Some(s);
            }
            if ok {
                break;
            }
        }
        let solution = best.expect("at least one start");
        let decoded = tr.decode(&solution.v_star);
        Ok(OcpOutcome {
            usable: usable(&solution, self.solver.tol),
            solution,
            decoded,
            transcription: tr,
        })
    }
}

/// Converged, or out of iterations at a point that satisfies the
/// constraints.
fn usable(s: &NlpSolution, tol: f64) -> bool {
    match s.status {
        SolveStatus::Converged => true,
        SolveStatus::MaxIter => s.primal_infeasibility <= 10.0 * tol,
        _ => false,
    }
}

fn first_move_bounds(ocp: &OcpSpec) -> (f64, f64) {
    match ocp.previous_input {
        Some(p) => (ocp.input_lb.max(p + ocp.du_lb), ocp.input_ub.min(p + ocp.du_ub)),
        None => (ocp.input_lb, ocp.input_ub),
    }
}

/// Previous plan shifted by one interval and projected onto the move
/// bounds.
fn clamped_controls(prev: &[f64], hc: usize, ocp: &OcpSpec, lo: f64, hi: f64) -> Vec<f64> {
    let mut u = Vec::with_capacity(hc);
    for j in 0..hc {
        let raw = prev[(j + 1).min(prev.len() - 1)];
        let v = if j == 0 {
            raw.clamp(lo, hi)
        } else {
            let p = u[j - 1];
            raw.clamp(ocp.input_lb.max(p + ocp.du_lb), ocp.input_ub.min(p + ocp.du_ub))
        };
        u.push(v);
    }
    u
}

/// Classical NMPC: output tracking over the horizon from the measured state.
pub struct ClassicalNmpc {
    setup: Arc<NmpcSetup>,
    sets: ConstraintSets,
    weights: CostWeights,
    slack: bool,
    previous: f64,
    warm: Option<Vec<f64>>,
}

impl ClassicalNmpc {
    pub fn new(
        setup: Arc<NmpcSetup>,
        sets: ConstraintSets,
        weights: CostWeights,
        slack: bool,
        initial_input: f64,
    ) -> Result<Self, ControllerError> {
        weights.validate()?;
        Ok(Self {
            setup,
            sets,
            weights,
            slack,
            previous: initial_input,
            warm: None,
        })
    }

    pub fn cost_spec(&self) -> CostSpec {
        CostSpec::tracking(self.weights.wy, self.weights.ybar)
    }

    pub fn solve_at(&self, k: usize, x: &[f64]) -> Result<OcpOutcome, ControllerError> {
        let ocp = self
            .setup
            .ocp(k, x, &self.sets, Some(self.previous), self.cost_spec(), self.slack);
        self.setup.solve(&ocp, self.warm.as_deref(), None)
    }
}

impl Controller for ClassicalNmpc {
    fn kind(&self) -> ControllerKind {
        ControllerKind::Classical
    }

    fn step(&mut self, inp: &StepInput) -> Result<StepReport, ControllerError> {
        let out = self.solve_at(inp.k, inp.x)?;
        let mut rep = StepReport {
            status: Some(out.solution.status),
            iterations: out.solution.iterations,
            ..Default::default()
        };
        if out.usable {
            rep.input = self.sets.clamp_input(out.decoded.controls[0], self.previous);
            rep.slack_max = out.slack_max(&self.setup.state_scale);
            self.warm = Some(out.decoded.controls);
        } else {
            rep.input = self.previous;
            rep.fallback = true;
            self.warm = None;
        }
        self.previous = rep.input;
        Ok(rep)
    }

    fn previous_input(&self) -> f64 {
        self.previous
    }
}
