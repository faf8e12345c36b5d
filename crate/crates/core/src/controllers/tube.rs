use std::sync::Arc;

use serde::Serialize;

use crate::integrator::{propagate, IntegratorError, Workspace};
use crate::nlp::{CostSpec, InitialStateDof, TubeTarget};

use super::nmpc::{NmpcSetup, OcpOutcome};
use super::{ConstraintSets, Controller, ControllerError, ControllerKind, CostWeights, StepInput, StepReport};

/// Tube center: nominal states at stages `0..=Hp` and inputs over `0..Hp`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TubeSolution {
    pub z_star: Vec<Vec<f64>>,
    pub nu_star: Vec<f64>,
    pub z0_star: Option<Vec<f64>>,
}

/// Sets, weights and slack switches of a tube controller.
#[derive(Debug, Clone, PartialEq)]
pub struct TubeConfig {
    /// `X`, `U`, `DU` of the ancillary problem.
    pub ancillary_sets: ConstraintSets,
    /// `Z`, `V`, `DV` of the nominal problem.
    pub nominal_sets: ConstraintSets,
    pub weights: CostWeights,
    pub nominal_slack: bool,
    pub ancillary_slack: bool,
    /// Weight of a per-stage output tracking term in the ancillary cost.
    /// Zero in the tube formulations.
    pub stage_weight: f64,
}

impl TubeConfig {
    pub fn validate(&self) -> Result<(), ControllerError> {
        self.weights.validate()?;
        if !self.ancillary_sets.contains(&self.nominal_sets) {
            return Err(ControllerError::SetsNotNested(
                "nominal state/input/move bounds exceed the ancillary ones".into(),
            ));
        }
        Ok(())
    }

    pub fn ancillary_cost(&self, tube: &TubeSolution) -> CostSpec {
        let w = &self.weights;
        CostSpec {
            wy: w.wy,
            ybar: w.ybar,
            w_stage: self.stage_weight,
            w_terminal: w.wy_hp,
            w_x: w.wx,
            w_u: w.wu,
            tube: Some(TubeTarget {
                z: tube.z_star.clone(),
                nu: tube.nu_star.clone(),
            }),
            smoothing: 1e-3,
        }
    }
}

/// Nominal problem from `z0` over the undisturbed model.
pub fn nominal_solve(
    setup: &NmpcSetup,
    cfg: &TubeConfig,
    k: usize,
    z0: &[f64],
    previous: Option<f64>,
    warm: Option<&[f64]>,
) -> Result<(TubeSolution, OcpOutcome), ControllerError> {
    let cost = CostSpec::tracking(cfg.weights.wy, cfg.weights.ybar);
    let ocp = setup.ocp(k, z0, &cfg.nominal_sets, previous, cost, cfg.nominal_slack);
    let out = setup.solve(&ocp, warm, None)?;
    let mut z_star = Vec::with_capacity(setup.horizon + 1);
    z_star.push(z0.to_vec());
    z_star.extend(out.decoded.nodes.iter().cloned());
    let tube = TubeSolution {
        z_star,
        nu_star: out.decoded.inputs.clone(),
        z0_star: None,
    };
    Ok((tube, out))
}

/// Ancillary problem from the plant state `x0` around `tube`. In online
/// mode the tube's initial state is a decision variable bounded by the
/// nominal state set and the center is regenerated from it.
#[allow(clippy::too_many_arguments)]
pub fn ancillary_step(
    setup: &NmpcSetup,
    cfg: &TubeConfig,
    k: usize,
    x0: &[f64],
    tube: &TubeSolution,
    online: bool,
    previous: Option<f64>,
    warm: Option<&[f64]>,
) -> Result<OcpOutcome, ControllerError> {
    let mut ocp = setup.ocp(
        k,
        x0,
        &cfg.ancillary_sets,
        previous,
        cfg.ancillary_cost(tube),
        cfg.ancillary_slack,
    );
    let mut guess = None;
    if online {
        let z = &cfg.nominal_sets;
        let g: Vec<f64> = tube.z_star[0]
            .iter()
            .zip(z.x_lb.iter().zip(&z.x_ub))
            .map(|(v, (l, u))| v.clamp(*l, *u))
            .collect();
        ocp.initial_state_dof = Some(InitialStateDof {
            lb: z.x_lb.clone(),
            ub: z.x_ub.clone(),
            guess: g.clone(),
        });
        guess = Some(g);
    }
    setup.solve(&ocp, warm, guess.as_deref())
}

/// One interval of the nominal model under the reference diet with the
/// manipulated flow replaced by `u`.
pub(crate) fn advance(setup: &NmpcSetup, k: usize, z: &[f64], u: f64) -> Result<Vec<f64>, IntegratorError> {
    let h = setup.interval / setup.substeps as f64;
    let t = k as f64 * setup.interval;
    let mut flows = setup.d_ref.sample_substeps(t, h, setup.substeps);
    for f in flows.iter_mut() {
        f[setup.control_index] = u;
    }
    let mut ws = Workspace::new(z.len(), setup.model.config.n_feedstocks(), 0);
    propagate(&setup.model, z, &flows, t, h, &mut ws)
}

/// Stitched nominal closed loop over a whole scenario.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OfflineTubeStore {
    /// Nominal states at every control instant.
    pub z: Vec<Vec<f64>>,
    /// Nominal inputs over every interval.
    pub nu: Vec<f64>,
    pub horizon: usize,
}

impl OfflineTubeStore {
    /// Tube slice starting at step `k`; the tail repeats the last entries.
    pub fn slice(&self, k: usize) -> TubeSolution {
        let zl = self.z.len() - 1;
        let nl = self.nu.len() - 1;
        TubeSolution {
            z_star: (k..=k + self.horizon).map(|j| self.z[j.min(zl)].clone()).collect(),
            nu_star: (k..k + self.horizon).map(|j| self.nu[j.min(nl)]).collect(),
            z0_star: None,
        }
    }
}

/// Receding-horizon nominal loop on the undisturbed model for `n_steps`
/// intervals plus one horizon of tail.
pub fn offline_tube_precompute(
    setup: &NmpcSetup,
    cfg: &TubeConfig,
    n_steps: usize,
    z_init: &[f64],
    u_init: f64,
) -> Result<OfflineTubeStore, ControllerError> {
    cfg.validate()?;
    let total = n_steps + setup.horizon;
    let mut z = z_init.to_vec();
    let mut prev = u_init;
    let mut warm: Option<Vec<f64>> = None;
    let mut store = OfflineTubeStore {
        z: vec![z.clone()],
        nu: Vec::with_capacity(total),
        horizon: setup.horizon,
    };
    for k in 0..total {
        let (tube, out) = nominal_solve(setup, cfg, k, &z, Some(prev), warm.as_deref())?;
        if !out.usable {
            return Err(ControllerError::Precompute {
                step: k,
                status: out.solution.status,
            });
        }
        let nu0 = cfg.nominal_sets.clamp_input(tube.nu_star[0], prev);
        z = advance(setup, k, &z, nu0).map_err(|e| ControllerError::Transcribe(e.into()))?;
        store.nu.push(nu0);
        store.z.push(z.clone());
        prev = nu0;
        warm = Some(out.decoded.controls);
    }
    Ok(store)
}

/// Ancillary tracking of a precomputed tube.
pub struct OfflineTube {
    setup: Arc<NmpcSetup>,
    cfg: TubeConfig,
    store: Arc<OfflineTubeStore>,
    previous: f64,
    warm: Option<Vec<f64>>,
}

impl OfflineTube {
    pub fn new(
        setup: Arc<NmpcSetup>,
        cfg: TubeConfig,
        store: Arc<OfflineTubeStore>,
        initial_input: f64,
    ) -> Result<Self, ControllerError> {
        cfg.validate()?;
        Ok(Self {
            setup,
            cfg,
            store,
            previous: initial_input,
            warm: None,
        })
    }

    pub fn store(&self) -> &OfflineTubeStore {
        &self.store
    }
}

impl Controller for OfflineTube {
    fn kind(&self) -> ControllerKind {
        ControllerKind::OfflineTube
    }

    fn step(&mut self, inp: &StepInput) -> Result<StepReport, ControllerError> {
        let tube = self.store.slice(inp.k);
        let out = ancillary_step(
            &self.setup,
            &self.cfg,
            inp.k,
            inp.x,
            &tube,
            false,
            Some(self.previous),
            self.warm.as_deref(),
        )?;
        let mut rep = StepReport {
            status: Some(out.solution.status),
            iterations: out.solution.iterations,
            nu0: Some(tube.nu_star[0]),
            ..Default::default()
        };
        if out.usable {
            rep.input = self.cfg.ancillary_sets.clamp_input(out.decoded.controls[0], self.previous);
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

/// Nominal and ancillary problems solved every step, with the
/// re-optimized initial state fed back to the next nominal problem.
pub struct OnlineTube {
    setup: Arc<NmpcSetup>,
    cfg: TubeConfig,
    z_next: Vec<f64>,
    nu_prev: f64,
    previous: f64,
    warm_nominal: Option<Vec<f64>>,
    warm_ancillary: Option<Vec<f64>>,
    last_tube: Option<TubeSolution>,
}

impl OnlineTube {
    /// `z_init` is the nominal initial state at step 0, e.g. the steady
    /// state of an open-loop run.
    pub fn new(
        setup: Arc<NmpcSetup>,
        cfg: TubeConfig,
        z_init: Vec<f64>,
        initial_input: f64,
    ) -> Result<Self, ControllerError> {
        cfg.validate()?;
        Ok(Self {
            setup,
            cfg,
            z_next: z_init,
            nu_prev: initial_input,
            previous: initial_input,
            warm_nominal: None,
            warm_ancillary: None,
            last_tube: None,
        })
    }

    /// Nominal initial state for the next step.
    pub fn nominal_state(&self) -> &[f64] {
        &self.z_next
    }

    pub fn last_tube(&self) -> Option<&TubeSolution> {
        self.last_tube.as_ref()
    }
}

impl Controller for OnlineTube {
    fn kind(&self) -> ControllerKind {
        ControllerKind::OnlineTube
    }

    fn step(&mut self, inp: &StepInput) -> Result<StepReport, ControllerError> {
        let k = inp.k;
        let (mut tube, nom) = nominal_solve(
            &self.setup,
            &self.cfg,
            k,
            &self.z_next,
            Some(self.nu_prev),
            self.warm_nominal.as_deref(),
        )?;
        let mut rep = StepReport {
            nominal_status: Some(nom.solution.status),
            ..Default::default()
        };
        if !nom.usable {
            self.warm_nominal = None;
            rep.input = self.previous;
            rep.fallback = true;
            self.z_next = advance(&self.setup, k, &self.z_next, self.nu_prev)
                .map_err(|e| ControllerError::Transcribe(e.into()))?;
            return Ok(rep);
        }
        self.warm_nominal = Some(nom.decoded.controls.clone());
        let nu0 = self.cfg.nominal_sets.clamp_input(tube.nu_star[0], self.nu_prev);
        rep.nu0 = Some(nu0);

        let anc = ancillary_step(
            &self.setup,
            &self.cfg,
            k,
            inp.x,
            &tube,
            true,
            Some(self.previous),
            self.warm_ancillary.as_deref(),
        )?;
        rep.status = Some(anc.solution.status);
        rep.iterations = anc.solution.iterations;
        rep.slack_max = out_slack(&anc, &nom, &self.setup.state_scale);
        if anc.usable {
            rep.input = self.cfg.ancillary_sets.clamp_input(anc.decoded.controls[0], self.previous);
            let z0 = anc.decoded.z0.clone().expect("online problem carries z0");
            let center = anc
                .transcription
                .core
                .tube_center(&anc.solution.v_star)
                .expect("online problem carries a tube");
            self.z_next = center[1].clone();
            tube.z0_star = Some(z0.clone());
            tube.z_star = center;
            rep.z0_star = Some(z0);
            self.warm_ancillary = Some(anc.decoded.controls);
        } else {
            rep.input = self.previous;
            rep.fallback = true;
            self.warm_ancillary = None;
            self.z_next = tube.z_star[1].clone();
        }
        self.nu_prev = nu0;
        self.previous = rep.input;
        self.last_tube = Some(tube);
        Ok(rep)
    }

    fn previous_input(&self) -> f64 {
        self.previous
    }
}

fn out_slack(a: &OcpOutcome, b: &OcpOutcome, scale: &[f64]) -> f64 {
    let sa = if a.usable { a.slack_max(scale) } else { 0.0 };
    sa.max(b.slack_max(scale))
}
