//! Direct multiple shooting for the receding-horizon problems.
//!
//! Decision vector, all entries scaled to order one:
//!
//! ```text
//! [ u_0 .. u_{Hc-1} | x_1 .. x_Hp | s_1 .. s_Hp | z0 ]
//! ```
//!
//! Controls past `Hc - 1` repeat the last free move. Slacks soften the
//! non-physical state bounds; `z0` is the re-optimized nominal initial state
//! of the online tube, from which the tube center is regenerated by
//! simulation.

use std::sync::Arc;

use thiserror::Error;

use crate::integrator::{rk4_step_in_place, rk4_step_sens, FeedSchedule, IntegratorError, Workspace};
use crate::model::{Digester, OutputVector, ProcessModel, N_OUTPUTS};

use super::problem::{EvalError, LinearRow, NlpFunctions, NlpProblem, VarBlock};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TranscribeError {
    #[error("inconsistent bounds: {0}")]
    InconsistentBounds(String),
    #[error("invalid horizon: {0}")]
    Horizon(String),
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error(transparent)]
    Integrator(#[from] IntegratorError),
}

/// Nominal trajectory tracked by the ancillary cost.
#[derive(Debug, Clone, PartialEq)]
pub struct TubeTarget {
    /// Nominal states at stages `0..=Hp`. Ignored when the initial state is
    /// a decision variable; the trajectory is regenerated from `z0` instead.
    pub z: Vec<Vec<f64>>,
    /// Nominal inputs over stages `0..Hp`.
    pub nu: Vec<f64>,
}

/// Cost structure shared by all formulations.
///
/// ```text
/// J = w_stage * sum_{k=1..Hp} phi_k + w_terminal * phi_Hp
///   + sum_{t=0..Hp-1} ( w_x |(x_t - z_t)/xs| + w_u |(u_t - nu_t)/us| )
///   + slack penalty
/// ```
/// with `phi_k = |W_y^(1/2) (y_k - y_ref,k) / ybar|`. Norms are smoothed by
/// `sqrt(|.|^2 + delta^2) - delta` so the problem stays twice differentiable.
#[derive(Debug, Clone, PartialEq)]
pub struct CostSpec {
    pub wy: [f64; N_OUTPUTS],
    pub ybar: [f64; N_OUTPUTS],
    pub w_stage: f64,
    pub w_terminal: f64,
    pub w_x: f64,
    pub w_u: f64,
    pub tube: Option<TubeTarget>,
    pub smoothing: f64,
}

impl CostSpec {
    pub fn tracking(wy: [f64; N_OUTPUTS], ybar: [f64; N_OUTPUTS]) -> Self {
        Self {
            wy,
            ybar,
            w_stage: 1.0,
            w_terminal: 0.0,
            w_x: 0.0,
            w_u: 0.0,
            tube: None,
            smoothing: 1e-3,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SlackConfig {
    /// Penalty weight on normalized slacks (linear plus quadratic).
    pub weight: f64,
    /// Which state components may be softened.
    pub states: Vec<bool>,
}

/// Online-tube extra degree of freedom: the nominal initial state.
#[derive(Debug, Clone, PartialEq)]
pub struct InitialStateDof {
    pub lb: Vec<f64>,
    pub ub: Vec<f64>,
    pub guess: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OcpSpec {
    pub model: Digester,
    pub horizon: usize,
    pub control_horizon: usize,
    pub interval: f64,
    pub substeps: usize,
    pub t0: f64,
    pub x0: Vec<f64>,
    /// Feedstock index of the manipulated flow.
    pub control_index: usize,
    /// Known flows of all feedstocks; the entry of the manipulated one is
    /// ignored.
    pub known_disturbance: FeedSchedule,
    /// References at stages `1..=Hp`.
    pub reference: Vec<OutputVector>,
    pub cost: CostSpec,
    pub state_lb: Vec<f64>,
    pub state_ub: Vec<f64>,
    pub input_lb: f64,
    pub input_ub: f64,
    pub du_lb: f64,
    pub du_ub: f64,
    /// Input applied over the previous interval; bounds the first move.
    pub previous_input: Option<f64>,
    pub slack: Option<SlackConfig>,
    pub initial_state_dof: Option<InitialStateDof>,
    pub state_scale: Vec<f64>,
    pub input_scale: f64,
    /// Cold-start value for every shooting node.
    pub state_guess: Vec<f64>,
}

/// Sizes, scales and the simulation setup of a transcribed problem.
#[derive(Debug)]
pub struct ShootingCore {
    model: Digester,
    n: usize,
    hp: usize,
    hc: usize,
    h: f64,
    t0: f64,
    x0: Vec<f64>,
    ci: usize,
    /// Flows per interval per substep, manipulated entry zeroed.
    flows: Vec<Vec<Vec<f64>>>,
    reference: Vec<OutputVector>,
    cost: CostSpec,
    slack: Option<SlackConfig>,
    state_lb: Vec<f64>,
    state_ub: Vec<f64>,
    xs: Vec<f64>,
    us: f64,
    n_slack: usize,
    has_z0: bool,
}

/// Index bookkeeping plus decoding helpers for a transcribed OCP.
#[derive(Debug, Clone)]
pub struct Transcription {
    pub core: Arc<ShootingCore>,
}

/// `NlpFunctions` implementation over a [`ShootingCore`].
#[derive(Debug, Clone)]
pub struct ShootingNlp {
    pub core: Arc<ShootingCore>,
}

impl ShootingCore {
    pub fn n_states(&self) -> usize {
        self.n
    }
    pub fn horizon(&self) -> usize {
        self.hp
    }
    pub fn control_horizon(&self) -> usize {
        self.hc
    }
    fn off_x(&self) -> usize {
        self.hc
    }
    fn off_s(&self) -> usize {
        self.hc + self.hp * self.n
    }
    fn off_z(&self) -> usize {
        self.off_s() + self.n_slack
    }
    pub fn n_vars(&self) -> usize {
        self.off_z() + if self.has_z0 { self.n } else { 0 }
    }
    fn n_eq(&self) -> usize {
        self.hp * self.n
    }

    /// Free-move index applied over interval `k`.
    fn move_of(&self, k: usize) -> usize {
        k.min(self.hc - 1)
    }

    pub fn controls(&self, v: &[f64]) -> Vec<f64> {
        (0..self.hc).map(|j| v[j] * self.us).collect()
    }

    /// Input applied over each of the `Hp` intervals.
    pub fn input_sequence(&self, v: &[f64]) -> Vec<f64> {
        (0..self.hp).map(|k| v[self.move_of(k)] * self.us).collect()
    }

    /// Shooting-node states `x_1..x_Hp` in physical units.
    pub fn nodes(&self, v: &[f64]) -> Vec<Vec<f64>> {
        (0..self.hp)
            .map(|k| {
                let o = self.off_x() + k * self.n;
                (0..self.n).map(|i| v[o + i] * self.xs[i]).collect()
            })
            .collect()
    }

    /// Slacks per node in physical units (empty without slacks).
    pub fn slacks(&self, v: &[f64]) -> Vec<Vec<f64>> {
        if self.n_slack == 0 {
            return Vec::new();
        }
        (0..self.hp)
            .map(|k| {
                let o = self.off_s() + k * self.n;
                (0..self.n).map(|i| v[o + i] * self.xs[i]).collect()
            })
            .collect()
    }

    pub fn z0(&self, v: &[f64]) -> Option<Vec<f64>> {
        self.has_z0.then(|| {
            let o = self.off_z();
            (0..self.n).map(|i| v[o + i] * self.xs[i]).collect()
        })
    }

    fn interval_flows(&self, k: usize, sub: usize, u: f64, out: &mut [f64]) {
        out.copy_from_slice(&self.flows[k][sub]);
        out[self.ci] = u;
    }

    /// One interval from `x` (physical units) under input `u`.
    fn step(&self, k: usize, x: &mut [f64], u: f64, ws: &mut Workspace, fl: &mut [f64]) -> Result<(), EvalError> {
        let n_sub = self.flows[k].len();
        for sub in 0..n_sub {
            self.interval_flows(k, sub, u, fl);
            let t = self.t0 + k as f64 * n_sub as f64 * self.h + sub as f64 * self.h;
            rk4_step_in_place(&self.model, t, x, fl, self.h, ws).map_err(|_| EvalError::NonFinite("simulation"))?;
        }
        Ok(())
    }

    /// One interval with sensitivities: returns `(dx+/dx, dx+/du)`, both
    /// in physical units.
    fn step_sens(
        &self,
        k: usize,
        x: &mut [f64],
        u: f64,
        ws: &mut Workspace,
        fl: &mut [f64],
    ) -> Result<(Vec<f64>, Vec<f64>), EvalError> {
        let n = self.n;
        let nc = n + 1;
        let mut s = vec![0.0; n * nc];
        for i in 0..n {
            s[i * nc + i] = 1.0;
        }
        let n_sub = self.flows[k].len();
        let cols = [self.ci];
        for sub in 0..n_sub {
            self.interval_flows(k, sub, u, fl);
            let t = self.t0 + k as f64 * n_sub as f64 * self.h + sub as f64 * self.h;
            rk4_step_sens(&self.model, t, x, fl, self.h, &mut s, &cols, ws)
                .map_err(|_| EvalError::NonFinite("simulation"))?;
        }
        let mut sx = vec![0.0; n * n];
        let mut su = vec![0.0; n];
        for i in 0..n {
            sx[i * n..(i + 1) * n].copy_from_slice(&s[i * nc..i * nc + n]);
            su[i] = s[i * nc + n];
        }
        Ok((sx, su))
    }

    fn workspace(&self, cols: usize) -> (Workspace, Vec<f64>) {
        let m = self.model.config.n_feedstocks();
        (Workspace::new(self.n, m, cols), vec![0.0; m])
    }

    /// Tube center regenerated from `z0` under the nominal inputs, stages
    /// `0..=Hp`, with sensitivities to `z0` when requested.
    fn tube_from_z0(
        &self,
        z0: &[f64],
        nu: &[f64],
        with_sens: bool,
    ) -> Result<(Vec<Vec<f64>>, Vec<Vec<f64>>), EvalError> {
        let n = self.n;
        let (mut ws, mut fl) = self.workspace(if with_sens { n + 1 } else { 0 });
        let mut z = z0.to_vec();
        let mut traj = vec![z.clone()];
        let mut sens = Vec::new();
        let mut acc = vec![0.0; n * n];
        for i in 0..n {
            acc[i * n + i] = 1.0;
        }
        if with_sens {
            sens.push(acc.clone());
        }
        for k in 0..self.hp {
            if with_sens {
                let (sx, _) = self.step_sens(k, &mut z, nu[k], &mut ws, &mut fl)?;
                acc = matmul(&sx, &acc, n);
                sens.push(acc.clone());
            } else {
                self.step(k, &mut z, nu[k], &mut ws, &mut fl)?;
            }
            traj.push(z.clone());
        }
        Ok((traj, sens))
    }

    /// Tube center for the current decision vector (fixed target or
    /// regenerated from `z0`).
    pub fn tube_center(&self, v: &[f64]) -> Option<Vec<Vec<f64>>> {
        let tube = self.cost.tube.as_ref()?;
        match self.z0(v) {
            Some(z0) => self.tube_from_z0(&z0, &tube.nu, false).ok().map(|(t, _)| t),
            None => Some(tube.z.clone()),
        }
    }

    /// Predicted outputs at nodes `1..=Hp`.
    pub fn predicted_outputs(&self, v: &[f64]) -> Vec<OutputVector> {
        self.nodes(v).iter().map(|x| self.model.outputs(0.0, x)).collect()
    }

    fn slack_rows(&self) -> Vec<LinearRow> {
        let (lb, ub) = (&self.state_lb, &self.state_ub);
        let mut rows = Vec::new();
        let Some(sc) = &self.slack else { return rows };
        for k in 0..self.hp {
            for i in 0..self.n {
                if !sc.states[i] {
                    continue;
                }
                let xi = self.off_x() + k * self.n + i;
                let si = self.off_s() + k * self.n + i;
                if ub[i].is_finite() {
                    rows.push(LinearRow {
                        coefs: vec![(xi, 1.0), (si, -1.0)],
                        lb: f64::NEG_INFINITY,
                        ub: ub[i] / self.xs[i],
                    });
                }
                if lb[i] > 0.0 {
                    rows.push(LinearRow {
                        coefs: vec![(xi, 1.0), (si, 1.0)],
                        lb: lb[i] / self.xs[i],
                        ub: f64::INFINITY,
                    });
                }
            }
        }
        rows
    }

    /// Exact (unsmoothed) output tracking cost at the nodes.
    pub fn exact_tracking_cost(&self, v: &[f64]) -> f64 {
        let c = &self.cost;
        self.predicted_outputs(v)
            .iter()
            .zip(&self.reference)
            .map(|(y, r)| {
                let e = [(y.qm - r.qm) / c.ybar[0], (y.ratio - r.ratio) / c.ybar[1]];
                (c.wy[0] * e[0] * e[0] + c.wy[1] * e[1] * e[1]).sqrt()
            })
            .sum()
    }
}

fn matmul(a: &[f64], b: &[f64], n: usize) -> Vec<f64> {
    let mut c = vec![0.0; n * n];
    for i in 0..n {
        for l in 0..n {
            let x = a[i * n + l];
            if x != 0.0 {
                for j in 0..n {
                    c[i * n + j] += x * b[l * n + j];
                }
            }
        }
    }
    c
}

/// Smoothed weighted norm `sqrt(r'Wr + d^2) - d` with gradient and Hessian
/// in `r`.
struct Smoothed {
    value: f64,
    grad: Vec<f64>,
    hess: Vec<f64>,
}

fn smoothed_norm(r: &[f64], w: &[f64], delta: f64, second: bool) -> Smoothed {
    let p = r.len();
    let q: f64 = r.iter().zip(w).map(|(ri, wi)| wi * ri * ri).sum();
    let s = (q + delta * delta).sqrt();
    let wr: Vec<f64> = r.iter().zip(w).map(|(ri, wi)| wi * ri).collect();
    let grad: Vec<f64> = wr.iter().map(|x| x / s).collect();
    let mut hess = Vec::new();
    if second {
        hess = vec![0.0; p * p];
        let s3 = s * s * s;
        for i in 0..p {
            for j in 0..p {
                hess[i * p + j] = -wr[i] * wr[j] / s3;
            }
            hess[i * p + i] += w[i] / s;
        }
    }
    Smoothed {
        value: s - delta,
        grad,
        hess,
    }
}

/// Accumulate `weight * psi(r)` with `dr/dv_j = jr[j]` for the listed
/// variables. Returns the term value.
fn add_term(
    weight: f64,
    r: &[f64],
    w: &[f64],
    delta: f64,
    jr: &[(usize, Vec<f64>)],
    grad: Option<&mut [f64]>,
    hess: Option<(&mut [f64], usize)>,
) -> f64 {
    if weight == 0.0 {
        return 0.0;
    }
    let ps = smoothed_norm(r, w, delta, hess.is_some());
    if let Some(g) = grad {
        for (j, d) in jr {
            g[*j] += weight * ps.grad.iter().zip(d).map(|(a, b)| a * b).sum::<f64>();
        }
    }
    if let Some((h, nv)) = hess {
        let p = r.len();
        let hd: Vec<Vec<f64>> = jr
            .iter()
            .map(|(_, d)| {
                (0..p)
                    .map(|a| (0..p).map(|b| ps.hess[a * p + b] * d[b]).sum())
                    .collect()
            })
            .collect();
        for (ja, da) in jr {
            for (b, (jb, _)) in jr.iter().enumerate() {
                let v: f64 = da.iter().zip(&hd[b]).map(|(x, y)| x * y).sum();
                h[ja * nv + jb] += weight * v;
            }
        }
    }
    weight * ps.value
}

impl ShootingNlp {
    fn run(
        &self,
        v: &[f64],
        c: &mut [f64],
        mut derivs: Option<(&mut [f64], &mut [f64], &mut [f64])>,
    ) -> Result<f64, EvalError> {
        let core = &*self.core;
        let n = core.n;
        let hp = core.hp;
        let nv = core.n_vars();
        let xs = &core.xs;
        let us = core.us;
        let cs = &core.cost;
        let want = derivs.is_some();
        let (mut ws, mut fl) = core.workspace(if want { n + 1 } else { 0 });
        let nodes = core.nodes(v);
        let inputs = core.input_sequence(v);

        if let Some((g, j, h)) = derivs.as_mut() {
            g.iter_mut().for_each(|x| *x = 0.0);
            j.iter_mut().for_each(|x| *x = 0.0);
            h.iter_mut().for_each(|x| *x = 0.0);
        }

        // continuity
        for k in 0..hp {
            let mut x = if k == 0 { core.x0.clone() } else { nodes[k - 1].clone() };
            let uk = inputs[k];
            let ox = core.off_x() + k * n;
            if let Some((_, jac, _)) = derivs.as_mut() {
                let (sx, su) = core.step_sens(k, &mut x, uk, &mut ws, &mut fl)?;
                let mv = core.move_of(k);
                for i in 0..n {
                    let row = (k * n + i) * nv;
                    jac[row + ox + i] = -1.0;
                    jac[row + mv] += su[i] * us / xs[i];
                    if k > 0 {
                        let op = core.off_x() + (k - 1) * n;
                        for l in 0..n {
                            jac[row + op + l] = sx[i * n + l] * xs[l] / xs[i];
                        }
                    }
                }
            } else {
                core.step(k, &mut x, uk, &mut ws, &mut fl)?;
            }
            for i in 0..n {
                c[k * n + i] = (x[i] - nodes[k][i]) / xs[i];
            }
        }

        let delta = cs.smoothing;
        let mut total = 0.0;
        let (mut g_opt, mut h_opt) = match derivs.as_mut() {
            Some((g, _, h)) => (Some(&mut **g), Some(&mut **h)),
            None => (None, None),
        };

        // output tracking
        let mut jy = vec![0.0; N_OUTPUTS * n];
        for k in 0..hp {
            let weight = cs.w_stage + if k + 1 == hp { cs.w_terminal } else { 0.0 };
            if weight == 0.0 {
                continue;
            }
            let y = core.model.outputs(0.0, &nodes[k]).as_array();
            let r = core.reference[k].as_array();
            let e: Vec<f64> = (0..N_OUTPUTS).map(|i| (y[i] - r[i]) / cs.ybar[i]).collect();
            let mut jr = Vec::new();
            if want {
                core.model.output_jacobian(0.0, &nodes[k], &mut jy);
                let ox = core.off_x() + k * n;
                for l in 0..n {
                    let d: Vec<f64> = (0..N_OUTPUTS).map(|i| jy[i * n + l] * xs[l] / cs.ybar[i]).collect();
                    if d.iter().any(|x| *x != 0.0) {
                        jr.push((ox + l, d));
                    }
                }
            }
            total += add_term(
                weight,
                &e,
                &cs.wy,
                delta,
                &jr,
                g_opt.as_deref_mut(),
                h_opt.as_deref_mut().map(|h| (h, nv)),
            );
        }

        // tube tracking
        if let Some(tube) = &cs.tube {
            let ones = vec![1.0; n];
            let (center, zsens) = match core.z0(v) {
                Some(z0) => core.tube_from_z0(&z0, &tube.nu, want)?,
                None => (tube.z.clone(), Vec::new()),
            };
            if cs.w_x != 0.0 {
                for t in 0..hp {
                    let x = if t == 0 { &core.x0 } else { &nodes[t - 1] };
                    let r: Vec<f64> = (0..n).map(|i| (x[i] - center[t][i]) / xs[i]).collect();
                    let mut jr = Vec::new();
                    if want {
                        if t > 0 {
                            let ox = core.off_x() + (t - 1) * n;
                            for l in 0..n {
                                let mut d = vec![0.0; n];
                                d[l] = 1.0;
                                jr.push((ox + l, d));
                            }
                        }
                        if !zsens.is_empty() {
                            let oz = core.off_z();
                            for l in 0..n {
                                let d: Vec<f64> = (0..n).map(|i| -zsens[t][i * n + l] * xs[l] / xs[i]).collect();
                                jr.push((oz + l, d));
                            }
                        }
                    }
                    total += add_term(
                        cs.w_x,
                        &r,
                        &ones,
                        delta,
                        &jr,
                        g_opt.as_deref_mut(),
                        h_opt.as_deref_mut().map(|h| (h, nv)),
                    );
                }
            }
            if cs.w_u != 0.0 {
                for t in 0..hp {
                    let r = [(inputs[t] - tube.nu[t]) / us];
                    let jr = if want { vec![(core.move_of(t), vec![1.0])] } else { Vec::new() };
                    total += add_term(
                        cs.w_u,
                        &r,
                        &[1.0],
                        delta,
                        &jr,
                        g_opt.as_deref_mut(),
                        h_opt.as_deref_mut().map(|h| (h, nv)),
                    );
                }
            }
        }

        // slack penalty on normalized slacks
        if let Some(sc) = &core.slack {
            for idx in core.off_s()..core.off_s() + core.n_slack {
                let s = v[idx];
                total += sc.weight * (s + s * s);
                if let Some(g) = g_opt.as_deref_mut() {
                    g[idx] += sc.weight * (1.0 + 2.0 * s);
                }
                if let Some(h) = h_opt.as_deref_mut() {
                    h[idx * nv + idx] += 2.0 * sc.weight;
                }
            }
        }

        if !total.is_finite() || c.iter().any(|x| !x.is_finite()) {
            return Err(EvalError::NonFinite("shooting"));
        }
        Ok(total)
    }
}

impl NlpFunctions for ShootingNlp {
    fn n_vars(&self) -> usize {
        self.core.n_vars()
    }
    fn n_eq(&self) -> usize {
        self.core.n_eq()
    }
    fn evaluate(&self, v: &[f64], c: &mut [f64]) -> Result<f64, EvalError> {
        self.run(v, c, None)
    }
    fn derivatives(
        &self,
        v: &[f64],
        _lambda: &[f64],
        grad: &mut [f64],
        jac: &mut [f64],
        hess: &mut [f64],
    ) -> Result<(), EvalError> {
        let mut c = vec![0.0; self.core.n_eq()];
        self.run(v, &mut c, Some((grad, jac, hess))).map(|_| ())
    }
}

fn check_len(what: &str, got: usize, expected: usize) -> Result<(), TranscribeError> {
    if got != expected {
        return Err(TranscribeError::Shape(format!("{what}: {got} entries, expected {expected}")));
    }
    Ok(())
}

/// Transcribe an optimal-control problem into an [`NlpProblem`].
pub fn transcribe(ocp: &OcpSpec) -> Result<(NlpProblem, Transcription), TranscribeError> {
    let n = ocp.model.config.n_states();
    let hp = ocp.horizon;
    let hc = ocp.control_horizon;
    if hc == 0 || hc >= hp {
        return Err(TranscribeError::Horizon(format!("need 0 < Hc < Hp, got Hc={hc}, Hp={hp}")));
    }
    if !(ocp.interval > 0.0) || ocp.substeps == 0 {
        return Err(TranscribeError::Horizon("interval and substeps must be positive".into()));
    }
    check_len("x0", ocp.x0.len(), n)?;
    check_len("state_lb", ocp.state_lb.len(), n)?;
    check_len("state_ub", ocp.state_ub.len(), n)?;
    check_len("state_scale", ocp.state_scale.len(), n)?;
    check_len("state_guess", ocp.state_guess.len(), n)?;
    check_len("reference", ocp.reference.len(), hp)?;
    for i in 0..n {
        if !(ocp.state_lb[i] <= ocp.state_ub[i]) {
            return Err(TranscribeError::InconsistentBounds(format!("state {i}")));
        }
    }
    if !(ocp.input_lb <= ocp.input_ub) {
        return Err(TranscribeError::InconsistentBounds("input".into()));
    }
    if !(ocp.du_lb <= ocp.du_ub) {
        return Err(TranscribeError::InconsistentBounds("input move".into()));
    }
    if let Some(sc) = &ocp.slack {
        check_len("slack states", sc.states.len(), n)?;
    }
    if let Some(t) = &ocp.cost.tube {
        check_len("tube inputs", t.nu.len(), hp)?;
        if ocp.initial_state_dof.is_none() {
            check_len("tube states", t.z.len(), hp + 1)?;
        }
    }
    if let Some(z) = &ocp.initial_state_dof {
        if ocp.cost.tube.is_none() {
            return Err(TranscribeError::Shape("initial-state DOF needs tube inputs".into()));
        }
        check_len("z0 lb", z.lb.len(), n)?;
        check_len("z0 ub", z.ub.len(), n)?;
        for i in 0..n {
            if !(z.lb[i] <= z.ub[i]) {
                return Err(TranscribeError::InconsistentBounds(format!("z0 state {i}")));
            }
        }
    }

    let h = ocp.interval / ocp.substeps as f64;
    let flows: Vec<Vec<Vec<f64>>> = (0..hp)
        .map(|k| {
            let mut f = ocp
                .known_disturbance
                .sample_substeps(ocp.t0 + k as f64 * ocp.interval, h, ocp.substeps);
            for sub in f.iter_mut() {
                sub.resize(ocp.model.config.n_feedstocks(), 0.0);
                sub[ocp.control_index] = 0.0;
            }
            f
        })
        .collect();
    let n_slack = if ocp.slack.is_some() { hp * n } else { 0 };
    let core = Arc::new(ShootingCore {
        model: ocp.model.clone(),
        n,
        hp,
        hc,
        h,
        t0: ocp.t0,
        x0: ocp.x0.clone(),
        ci: ocp.control_index,
        flows,
        reference: ocp.reference.clone(),
        cost: ocp.cost.clone(),
        slack: ocp.slack.clone(),
        state_lb: ocp.state_lb.clone(),
        state_ub: ocp.state_ub.clone(),
        xs: ocp.state_scale.clone(),
        us: ocp.input_scale,
        n_slack,
        has_z0: ocp.initial_state_dof.is_some(),
    });
    let nv = core.n_vars();
    let us = ocp.input_scale;
    let mut lb = vec![f64::NEG_INFINITY; nv];
    let mut ub = vec![f64::INFINITY; nv];
    let mut initial = vec![0.0; nv];

    // controls
    let (mut u0_lb, mut u0_ub) = (ocp.input_lb, ocp.input_ub);
    if let Some(prev) = ocp.previous_input {
        u0_lb = u0_lb.max(prev + ocp.du_lb);
        u0_ub = u0_ub.min(prev + ocp.du_ub);
        if u0_lb > u0_ub {
            return Err(TranscribeError::InconsistentBounds("first move".into()));
        }
    }
    let frozen = ocp.du_lb == 0.0 && ocp.du_ub == 0.0;
    for j in 0..hc {
        let (l, u) = if j == 0 || frozen { (u0_lb, u0_ub) } else { (ocp.input_lb, ocp.input_ub) };
        lb[j] = l / us;
        ub[j] = u / us;
        initial[j] = 0.5 * (lb[j] + ub[j]);
    }
    let mut rows = Vec::new();
    if !frozen {
        for j in 1..hc {
            rows.push(LinearRow {
                coefs: vec![(j, 1.0), (j - 1, -1.0)],
                lb: ocp.du_lb / us,
                ub: ocp.du_ub / us,
            });
        }
    } else if u0_lb < u0_ub {
        for j in 1..hc {
            rows.push(LinearRow {
                coefs: vec![(j, 1.0), (j - 1, -1.0)],
                lb: 0.0,
                ub: 0.0,
            });
        }
    }

    // states
    let soft = |i: usize| ocp.slack.as_ref().is_some_and(|s| s.states[i]);
    for k in 0..hp {
        for i in 0..n {
            let j = core.off_x() + k * n + i;
            let xs = ocp.state_scale[i];
            if soft(i) {
                lb[j] = ocp.state_lb[i].min(0.0) / xs;
                ub[j] = f64::INFINITY;
            } else {
                lb[j] = ocp.state_lb[i] / xs;
                ub[j] = ocp.state_ub[i] / xs;
            }
            initial[j] = ocp.state_guess[i] / xs;
        }
    }
    // slacks
    if let Some(sc) = &ocp.slack {
        for k in 0..hp {
            for i in 0..n {
                let j = core.off_s() + k * n + i;
                let softenable = sc.states[i] && (ocp.state_ub[i].is_finite() || ocp.state_lb[i] > 0.0);
                lb[j] = 0.0;
                ub[j] = if softenable { f64::INFINITY } else { 0.0 };
                let x = ocp.state_guess[i];
                let need = (x - ocp.state_ub[i]).max(ocp.state_lb[i] - x).max(0.0);
                initial[j] = if softenable { need / ocp.state_scale[i] } else { 0.0 };
            }
        }
        rows.extend(core.slack_rows());
    }
    if let Some(z) = &ocp.initial_state_dof {
        for i in 0..n {
            let j = core.off_z() + i;
            lb[j] = z.lb[i] / ocp.state_scale[i];
            ub[j] = z.ub[i] / ocp.state_scale[i];
            initial[j] = z.guess[i] / ocp.state_scale[i];
        }
    }

    let mut layout = vec![
        VarBlock {
            name: "controls",
            range: 0..hc,
        },
        VarBlock {
            name: "states",
            range: core.off_x()..core.off_s(),
        },
    ];
    if n_slack > 0 {
        layout.push(VarBlock {
            name: "slacks",
            range: core.off_s()..core.off_z(),
        });
    }
    if core.has_z0 {
        layout.push(VarBlock {
            name: "z0",
            range: core.off_z()..nv,
        });
    }
    let dependents = Some((core.off_x()..core.off_s()).collect());
    let problem = NlpProblem {
        lb,
        ub,
        rows,
        layout,
        dependents,
        initial,
        functions: Box::new(ShootingNlp { core: core.clone() }),
    };
    Ok((problem, Transcription { core }))
}

impl Transcription {
    /// Physical-unit summary of a solution vector.
    pub fn decode(&self, v: &[f64]) -> DecodedSolution {
        DecodedSolution {
            controls: self.core.controls(v),
            inputs: self.core.input_sequence(v),
            nodes: self.core.nodes(v),
            slacks: self.core.slacks(v),
            z0: self.core.z0(v),
            outputs: self.core.predicted_outputs(v),
        }
    }

    /// Decision vector for a given control sequence, with nodes obtained by
    /// forward simulation from `x0` (feasible for the continuity rows).
    pub fn simulated_guess(&self, controls: &[f64], z0: Option<&[f64]>) -> Vec<f64> {
        let core = &*self.core;
        let n = core.n;
        let mut v = vec![0.0; core.n_vars()];
        for (j, u) in controls.iter().enumerate().take(core.hc) {
            v[j] = u / core.us;
        }
        let (mut ws, mut fl) = core.workspace(0);
        let mut x = core.x0.clone();
        for k in 0..core.hp {
            let u = controls[core.move_of(k).min(controls.len() - 1)];
            if core.step(k, &mut x, u, &mut ws, &mut fl).is_err() {
                break;
            }
            for i in 0..n {
                v[core.off_x() + k * n + i] = x[i] / core.xs[i];
                if let Some(sc) = &core.slack {
                    if sc.states[i] {
                        let need = (x[i] - core.state_ub[i]).max(core.state_lb[i] - x[i]).max(0.0);
                        v[core.off_s() + k * n + i] = need / core.xs[i];
                    }
                }
            }
        }
        if let Some(z) = z0 {
            for i in 0..n {
                v[core.off_z() + i] = z[i] / core.xs[i];
            }
        }
        v
    }
}

/// Solution content in physical units.
#[derive(Debug, Clone, PartialEq)]
pub struct DecodedSolution {
    pub controls: Vec<f64>,
    pub inputs: Vec<f64>,
    pub nodes: Vec<Vec<f64>>,
    pub slacks: Vec<Vec<f64>>,
    pub z0: Option<Vec<f64>>,
    pub outputs: Vec<OutputVector>,
}
