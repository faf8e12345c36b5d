//! Fixed-step RK4 over control intervals, with optional forward sensitivities.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{OutputVector, ProcessModel};

/// Tolerance used when matching schedule boundaries to the substep grid (d).
const GRID_TOL: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum IntegratorError {
    #[error("non-finite state at t = {t}")]
    NonFiniteState { t: f64 },
    #[error("schedule boundary at t = {t} does not fall on the substep grid")]
    Misaligned { t: f64 },
    #[error("invalid interval [{t0}, {t1}] with substep {h}")]
    InvalidInterval { t0: f64, t1: f64, h: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeedKind {
    Continuous,
    Pulse,
}

/// Constant flows over `[start, start + duration)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeedEntry {
    pub start: f64,
    pub duration: f64,
    pub flows: Vec<f64>,
    pub kind: FeedKind,
}

impl FeedEntry {
    pub fn end(&self) -> f64 {
        self.start + self.duration
    }
    fn active(&self, t: f64) -> bool {
        t >= self.start && t < self.end()
    }
}

/// Piecewise-constant feed program. Flows of overlapping entries add up.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct FeedSchedule {
    pub n_flows: usize,
    pub entries: Vec<FeedEntry>,
}

impl FeedSchedule {
    pub fn new(n_flows: usize) -> Self {
        Self {
            n_flows,
            entries: Vec::new(),
        }
    }

    /// A single continuous entry over `[t0, t1)`.
    pub fn constant(flows: &[f64], t0: f64, t1: f64) -> Self {
        let mut s = Self::new(flows.len());
        s.push(t0, t1 - t0, flows.to_vec(), FeedKind::Continuous);
        s
    }

    pub fn push(&mut self, start: f64, duration: f64, flows: Vec<f64>, kind: FeedKind) {
        debug_assert_eq!(flows.len(), self.n_flows);
        debug_assert!(duration > 0.0);
        self.entries.push(FeedEntry {
            start,
            duration,
            flows,
            kind,
        });
    }

    pub fn flows_into(&self, t: f64, out: &mut [f64]) {
        out.iter_mut().for_each(|v| *v = 0.0);
        for e in self.entries.iter().filter(|e| e.active(t)) {
            for (o, f) in out.iter_mut().zip(&e.flows) {
                *o += f;
            }
        }
    }

    pub fn flows_at(&self, t: f64) -> Vec<f64> {
        let mut out = vec![0.0; self.n_flows];
        self.flows_into(t, &mut out);
        out
    }

    /// Entries restricted to those overlapping `[t0, t1)`.
    pub fn window(&self, t0: f64, t1: f64) -> Self {
        Self {
            n_flows: self.n_flows,
            entries: self
                .entries
                .iter()
                .filter(|e| e.start < t1 && e.end() > t0)
                .cloned()
                .collect(),
        }
    }

    /// Delivered volume per feedstock over `[t0, t1)` (L).
    pub fn delivered(&self, t0: f64, t1: f64) -> Vec<f64> {
        let mut v = vec![0.0; self.n_flows];
        for e in &self.entries {
            let overlap = (e.end().min(t1) - e.start.max(t0)).max(0.0);
            for (vi, f) in v.iter_mut().zip(&e.flows) {
                *vi += f * overlap;
            }
        }
        v
    }

    /// Sample flows at the midpoint of every substep in `[t0, t0 + n h)`.
    pub fn sample_substeps(&self, t0: f64, h: f64, n: usize) -> Vec<Vec<f64>> {
        let w = self.window(t0, t0 + n as f64 * h);
        (0..n).map(|i| w.flows_at(t0 + (i as f64 + 0.5) * h)).collect()
    }

    fn check_alignment(&self, t0: f64, t1: f64, h: f64) -> Result<(), IntegratorError> {
        for e in self.entries.iter().filter(|e| e.start < t1 && e.end() > t0) {
            for b in [e.start, e.end()] {
                if b > t0 && b < t1 {
                    let k = (b - t0) / h;
                    if (k - k.round()).abs() * h > GRID_TOL {
                        return Err(IntegratorError::Misaligned { t: b });
                    }
                }
            }
        }
        Ok(())
    }
}

/// Result of one integration step.
#[derive(Debug, Clone, PartialEq)]
pub struct Rk4Step {
    pub x: Vec<f64>,
    /// Sum of magnitudes removed by clamping negative components to zero.
    pub clamped: f64,
}

/// Scratch buffers reused across steps.
#[derive(Debug, Clone)]
pub struct Workspace {
    n: usize,
    k: [Vec<f64>; 4],
    xs: Vec<f64>,
    jx: Vec<f64>,
    ju: Vec<f64>,
    dk: [Vec<f64>; 4],
    stage_s: Vec<f64>,
}

impl Workspace {
    pub fn new(n: usize, n_flows: usize, n_cols: usize) -> Self {
        let v = |len: usize| vec![0.0; len];
        Self {
            n,
            k: [v(n), v(n), v(n), v(n)],
            xs: v(n),
            jx: v(n * n),
            ju: v(n * n_flows),
            dk: [v(n * n_cols), v(n * n_cols), v(n * n_cols), v(n * n_cols)],
            stage_s: v(n * n_cols),
        }
    }
}

fn all_finite(v: &[f64]) -> bool {
    v.iter().all(|x| x.is_finite())
}

/// One classical RK4 step; negative components are clamped to zero.
pub fn rk4_step<M: ProcessModel + ?Sized>(
    model: &M,
    t: f64,
    x: &[f64],
    flows: &[f64],
    dt: f64,
) -> Result<Rk4Step, IntegratorError> {
    let mut xn = x.to_vec();
    let mut ws = Workspace::new(x.len(), flows.len(), 0);
    let clamped = rk4_step_in_place(model, t, &mut xn, flows, dt, &mut ws)?;
    Ok(Rk4Step { x: xn, clamped })
}

/// In-place RK4 step; returns the clamped magnitude.
pub fn rk4_step_in_place<M: ProcessModel + ?Sized>(
    model: &M,
    t: f64,
    x: &mut [f64],
    flows: &[f64],
    dt: f64,
    ws: &mut Workspace,
) -> Result<f64, IntegratorError> {
    let n = ws.n;
    let coef = [0.0, 0.5, 0.5, 1.0];
    for s in 0..4 {
        if s == 0 {
            ws.xs.copy_from_slice(x);
        } else {
            for i in 0..n {
                ws.xs[i] = x[i] + coef[s] * dt * ws.k[s - 1][i];
            }
        }
        model.rhs(t + coef[s] * dt, &ws.xs, flows, &mut ws.k[s]);
        if !all_finite(&ws.k[s]) {
            return Err(IntegratorError::NonFiniteState { t });
        }
    }
    Ok(combine(x, dt, &ws.k))
}

fn combine(x: &mut [f64], dt: f64, k: &[Vec<f64>; 4]) -> f64 {
    let mut clamped = 0.0;
    for i in 0..x.len() {
        x[i] += dt / 6.0 * (k[0][i] + 2.0 * k[1][i] + 2.0 * k[2][i] + k[3][i]);
        if x[i] < 0.0 {
            clamped += -x[i];
            x[i] = 0.0;
        }
    }
    clamped
}

/// RK4 step that also advances the sensitivity matrix `s` (n x n_cols,
/// row-major). Columns `0..n` hold derivatives with respect to the initial
/// state; column `n + j` holds the derivative with respect to flow
/// `flow_cols[j]`. Rows of clamped components are zeroed.
#[allow(clippy::too_many_arguments)]
pub fn rk4_step_sens<M: ProcessModel + ?Sized>(
    model: &M,
    t: f64,
    x: &mut [f64],
    flows: &[f64],
    dt: f64,
    s: &mut [f64],
    flow_cols: &[usize],
    ws: &mut Workspace,
) -> Result<f64, IntegratorError> {
    let n = ws.n;
    let m = flows.len();
    let nc = n + flow_cols.len();
    debug_assert_eq!(s.len(), n * nc);
    let coef = [0.0, 0.5, 0.5, 1.0];
    for st in 0..4 {
        if st == 0 {
            ws.xs.copy_from_slice(x);
            ws.stage_s.copy_from_slice(s);
        } else {
            let a = coef[st] * dt;
            for i in 0..n {
                ws.xs[i] = x[i] + a * ws.k[st - 1][i];
            }
            let prev = &ws.dk[st - 1];
            for (o, (si, di)) in ws.stage_s.iter_mut().zip(s.iter().zip(prev)) {
                *o = si + a * di;
            }
        }
        let ts = t + coef[st] * dt;
        model.rhs(ts, &ws.xs, flows, &mut ws.k[st]);
        if !all_finite(&ws.k[st]) {
            return Err(IntegratorError::NonFiniteState { t });
        }
        model.jacobian(ts, &ws.xs, flows, &mut ws.jx, &mut ws.ju);
        let dk = &mut ws.dk[st];
        dk.iter_mut().for_each(|v| *v = 0.0);
        for i in 0..n {
            let row = &mut dk[i * nc..(i + 1) * nc];
            for l in 0..n {
                let a = ws.jx[i * n + l];
                if a != 0.0 {
                    let srow = &ws.stage_s[l * nc..(l + 1) * nc];
                    for (r, sv) in row.iter_mut().zip(srow) {
                        *r += a * sv;
                    }
                }
            }
            for (j, &fc) in flow_cols.iter().enumerate() {
                row[n + j] += ws.ju[i * m + fc];
            }
        }
    }
    for (idx, sv) in s.iter_mut().enumerate() {
        *sv += dt / 6.0 * (ws.dk[0][idx] + 2.0 * ws.dk[1][idx] + 2.0 * ws.dk[2][idx] + ws.dk[3][idx]);
    }
    let mut clamped = 0.0;
    for i in 0..n {
        let k = &ws.k;
        x[i] += dt / 6.0 * (k[0][i] + 2.0 * k[1][i] + 2.0 * k[2][i] + k[3][i]);
        if x[i] < 0.0 {
            clamped += -x[i];
            x[i] = 0.0;
            s[i * nc..(i + 1) * nc].iter_mut().for_each(|v| *v = 0.0);
        }
    }
    Ok(clamped)
}

/// Sampled trajectory over one or more intervals.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct SimTrajectory {
    pub times: Vec<f64>,
    pub states: Vec<Vec<f64>>,
    pub outputs: Vec<OutputVector>,
    /// Flows applied over each substep (one entry fewer than `times`).
    pub inputs_applied: Vec<Vec<f64>>,
    pub clamped: f64,
}

impl SimTrajectory {
    pub fn final_state(&self) -> &[f64] {
        self.states.last().expect("trajectory is never empty")
    }
}

/// Number of substeps of length `h` covering `[t0, t1]`.
pub fn substep_count(t0: f64, t1: f64, h: f64) -> Result<usize, IntegratorError> {
    if !(t1 > t0 && h > 0.0) {
        return Err(IntegratorError::InvalidInterval { t0, t1, h });
    }
    let k = (t1 - t0) / h;
    let n = k.round();
    if (k - n).abs() * h > GRID_TOL || n < 1.0 {
        return Err(IntegratorError::InvalidInterval { t0, t1, h });
    }
    Ok(n as usize)
}

/// Integrate from `t0` to `t1` under `schedule`, sampling every substep.
pub fn simulate_interval<M: ProcessModel + ?Sized>(
    model: &M,
    x0: &[f64],
    schedule: &FeedSchedule,
    t0: f64,
    t1: f64,
    substep: f64,
) -> Result<SimTrajectory, IntegratorError> {
    let n_sub = substep_count(t0, t1, substep)?;
    let h = (t1 - t0) / n_sub as f64;
    schedule.check_alignment(t0, t1, h)?;
    let w = schedule.window(t0, t1);
    let n = x0.len();
    let mut ws = Workspace::new(n, schedule.n_flows, 0);
    let mut x = x0.to_vec();
    let mut traj = SimTrajectory {
        times: Vec::with_capacity(n_sub + 1),
        states: Vec::with_capacity(n_sub + 1),
        outputs: Vec::with_capacity(n_sub + 1),
        inputs_applied: Vec::with_capacity(n_sub),
        clamped: 0.0,
    };
    traj.times.push(t0);
    traj.states.push(x.clone());
    traj.outputs.push(model.outputs(t0, &x));
    let mut flows = vec![0.0; schedule.n_flows];
    for i in 0..n_sub {
        let t = t0 + i as f64 * h;
        w.flows_into(t + 0.5 * h, &mut flows);
        traj.clamped += rk4_step_in_place(model, t, &mut x, &flows, h, &mut ws)?;
        let tn = if i + 1 == n_sub { t1 } else { t0 + (i + 1) as f64 * h };
        traj.times.push(tn);
        traj.states.push(x.clone());
        traj.outputs.push(model.outputs(tn, &x));
        traj.inputs_applied.push(flows.clone());
    }
    Ok(traj)
}

/// End state only, no sampling.
pub fn propagate<M: ProcessModel + ?Sized>(
    model: &M,
    x0: &[f64],
    substep_flows: &[Vec<f64>],
    t0: f64,
    h: f64,
    ws: &mut Workspace,
) -> Result<Vec<f64>, IntegratorError> {
    let mut x = x0.to_vec();
    for (i, flows) in substep_flows.iter().enumerate() {
        rk4_step_in_place(model, t0 + i as f64 * h, &mut x, flows, h, ws)?;
    }
    Ok(x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{ModelParameters, OutputVector};

    /// x' = -a x, scalar, flows ignored.
    pub(crate) struct Decay(pub f64);

    impl ProcessModel for Decay {
        fn n_states(&self) -> usize {
            1
        }
        fn n_flows(&self) -> usize {
            0
        }
        fn rhs(&self, _t: f64, x: &[f64], _u: &[f64], dx: &mut [f64]) {
            dx[0] = -self.0 * x[0];
        }
        fn jacobian(&self, _t: f64, _x: &[f64], _u: &[f64], jx: &mut [f64], _ju: &mut [f64]) {
            jx[0] = -self.0;
        }
        fn outputs(&self, _t: f64, x: &[f64]) -> OutputVector {
            OutputVector { qm: x[0], ratio: 0.0 }
        }
        fn output_jacobian(&self, _t: f64, _x: &[f64], jy: &mut [f64]) {
            jy[0] = 1.0;
            jy[1] = 0.0;
        }
    }

    #[test]
    fn zero_dynamics_leaves_state() {
        let s = rk4_step(&Decay(0.0), 0.0, &[3.5], &[], 0.7).unwrap();
        assert_eq!(s.x, vec![3.5]);
    }

    #[test]
    fn exponential_step() {
        let s = rk4_step(&Decay(1.0), 0.0, &[1.0], &[], 0.1).unwrap();
        assert!((s.x[0] - (-0.1f64).exp()).abs() < 1e-6);
    }

    #[test]
    fn local_error_order_five() {
        let err = |h: f64| (rk4_step(&Decay(1.0), 0.0, &[1.0], &[], h).unwrap().x[0] - (-h).exp()).abs();
        let ratio = err(0.2) / err(0.1);
        assert!((ratio - 32.0).abs() < 3.0, "ratio {ratio}");
    }

    /// x' = -1, drains through zero.
    struct Drain;

    impl ProcessModel for Drain {
        fn n_states(&self) -> usize {
            1
        }
        fn n_flows(&self) -> usize {
            0
        }
        fn rhs(&self, _t: f64, _x: &[f64], _u: &[f64], dx: &mut [f64]) {
            dx[0] = -1.0;
        }
        fn jacobian(&self, _t: f64, _x: &[f64], _u: &[f64], jx: &mut [f64], _ju: &mut [f64]) {
            jx[0] = 0.0;
        }
        fn outputs(&self, _t: f64, x: &[f64]) -> OutputVector {
            OutputVector { qm: x[0], ratio: 0.0 }
        }
        fn output_jacobian(&self, _t: f64, _x: &[f64], jy: &mut [f64]) {
            jy.iter_mut().for_each(|v| *v = 0.0);
        }
    }

    #[test]
    fn clamps_negative_overshoot() {
        let s = rk4_step(&Drain, 0.0, &[0.05], &[], 0.1).unwrap();
        assert_eq!(s.x[0], 0.0);
        assert!(s.clamped > 0.0);
    }

    #[test]
    fn misaligned_schedule_is_rejected() {
        let mut sched = FeedSchedule::new(0);
        sched.entries.push(FeedEntry {
            start: 0.13,
            duration: 0.1,
            flows: vec![],
            kind: FeedKind::Pulse,
        });
        let r = simulate_interval(&Decay(1.0), &[1.0], &sched, 0.0, 1.0, 0.25);
        assert_eq!(r, Err(IntegratorError::Misaligned { t: 0.13 }));
    }

    #[test]
    fn sensitivities_match_finite_differences() {
        let d = ModelParameters::default_set().digester();
        let n = 9;
        let x0 = vec![0.8, 4.0, 2.5, 2.0, 1.9, 0.17, 4.0, 58.0, 107.0];
        let flows = vec![0.095, 0.25, 0.03];
        let cols = [0usize, 2];
        let nc = n + cols.len();
        let h = 0.25 / 12.0;
        let steps = 12;
        let run = |x0: &[f64], flows: &[f64]| {
            let mut ws = Workspace::new(n, 3, 0);
            propagate(&d, x0, &vec![flows.to_vec(); steps], 0.0, h, &mut ws).unwrap()
        };
        let mut x = x0.clone();
        let mut s = vec![0.0; n * nc];
        for i in 0..n {
            s[i * nc + i] = 1.0;
        }
        let mut ws = Workspace::new(n, 3, nc);
        for k in 0..steps {
            rk4_step_sens(&d, k as f64 * h, &mut x, &flows, h, &mut s, &cols, &mut ws).unwrap();
        }
        assert_eq!(x, run(&x0, &flows));
        for j in 0..nc {
            let (xp, xm, step) = if j < n {
                let e = 1e-6 * x0[j].abs().max(1e-2);
                let mut a = x0.clone();
                let mut b = x0.clone();
                a[j] += e;
                b[j] -= e;
                (run(&a, &flows), run(&b, &flows), e)
            } else {
                let e = 1e-7;
                let mut a = flows.clone();
                let mut b = flows.clone();
                a[cols[j - n]] += e;
                b[cols[j - n]] -= e;
                (run(&x0, &a), run(&x0, &b), e)
            };
            for i in 0..n {
                let fd = (xp[i] - xm[i]) / (2.0 * step);
                let an = s[i * nc + j];
                assert!(
                    (fd - an).abs() <= 1e-5 * an.abs().max(1.0),
                    "d x{i} / d col{j}: {an} vs {fd}"
                );
            }
        }
    }
}
