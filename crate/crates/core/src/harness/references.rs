//! Diet plans, the known feed schedule `d_ref` and the output references
//! obtained by simulating the nominal model under it.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::integrator::{propagate, simulate_interval, FeedKind, FeedSchedule, IntegratorError, Workspace};
use crate::model::{Digester, OutputVector, ProcessModel, N_OUTPUTS};

use super::HarnessError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DietPhase {
    pub duration: f64,
    /// Daily flow per feedstock, L/d, in reactor feedstock order.
    pub flows: Vec<f64>,
}

/// Steady phases joined by linear ramps of length `transition`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DietPlan {
    pub phases: Vec<DietPhase>,
    #[serde(default)]
    pub transition: f64,
}

impl DietPlan {
    pub fn steady(flows: Vec<f64>, duration: f64) -> Self {
        Self {
            phases: vec![DietPhase { duration, flows }],
            transition: 0.0,
        }
    }

    pub fn validate(&self, m: usize) -> Result<(), HarnessError> {
        if self.phases.is_empty() {
            return Err(HarnessError::Config("diet has no phases".into()));
        }
        if !(self.transition >= 0.0) || (self.phases.len() > 1 && self.transition <= 0.0) {
            return Err(HarnessError::Config("diet transition must be positive".into()));
        }
        for (i, p) in self.phases.iter().enumerate() {
            if !(p.duration > 0.0) {
                return Err(HarnessError::Config(format!("diet phase {i}: duration must be positive")));
            }
            if p.flows.len() != m {
                return Err(HarnessError::Config(format!(
                    "diet phase {i}: {} flows for {m} feedstocks",
                    p.flows.len()
                )));
            }
            if p.flows.iter().any(|f| !(*f >= 0.0)) {
                return Err(HarnessError::Config(format!("diet phase {i}: negative flow")));
            }
        }
        Ok(())
    }

    /// Breakpoints `(t, flows)` of the piecewise-linear diet.
    fn knots(&self) -> Vec<(f64, &[f64])> {
        let mut k = Vec::new();
        let mut t = 0.0;
        for (i, p) in self.phases.iter().enumerate() {
            if i > 0 {
                t += self.transition;
            }
            k.push((t, p.flows.as_slice()));
            t += p.duration;
            k.push((t, p.flows.as_slice()));
        }
        k
    }

    pub fn total_duration(&self) -> f64 {
        self.phases.iter().map(|p| p.duration).sum::<f64>() + self.transition * (self.phases.len() - 1) as f64
    }

    /// Flows at `t`; constant before the start and after the end.
    pub fn flows_at(&self, t: f64) -> Vec<f64> {
        let k = self.knots();
        if t <= k[0].0 {
            return k[0].1.to_vec();
        }
        for w in k.windows(2) {
            let ((t0, a), (t1, b)) = (w[0], w[1]);
            if t < t1 {
                let s = if t1 > t0 { (t - t0) / (t1 - t0) } else { 1.0 };
                return a.iter().zip(b).map(|(x, y)| x + s * (y - x)).collect();
            }
        }
        k[k.len() - 1].1.to_vec()
    }

    /// Exact mean flows over `[t0, t1)`.
    pub fn mean_flows(&self, t0: f64, t1: f64) -> Vec<f64> {
        let mut cuts = vec![t0];
        cuts.extend(self.knots().iter().map(|k| k.0).filter(|t| *t > t0 && *t < t1));
        cuts.push(t1);
        let m = self.phases[0].flows.len();
        let mut acc = vec![0.0; m];
        for w in cuts.windows(2) {
            let (a, b) = (self.flows_at(w[0]), self.flows_at(w[1]));
            for i in 0..m {
                acc[i] += 0.5 * (a[i] + b[i]) * (w[1] - w[0]);
            }
        }
        acc.iter().map(|v| v / (t1 - t0)).collect()
    }

    /// Windows of constant diet.
    pub fn steady_windows(&self) -> Vec<(f64, f64)> {
        let k = self.knots();
        k.chunks(2).map(|c| (c[0].0, c[1].0)).collect()
    }

    /// Ramp windows between phases.
    pub fn transition_windows(&self) -> Vec<(f64, f64)> {
        let w = self.steady_windows();
        w.windows(2).map(|p| (p[0].1, p[1].0)).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeedingMode {
    Continuous,
    Impulsive,
}

/// How the non-manipulated feedstocks enter the reactor. In impulsive mode
/// they arrive as short rectangular pulses a few times per week, each
/// carrying the diet volume until the next pulse; the manipulated feed is
/// always continuous.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FeedingConfig {
    pub mode: FeedingMode,
    pub per_week: usize,
    pub pulse_hours: f64,
    /// Days of periodic feeding simulated before `t = 0`.
    pub warmup_days: f64,
}

impl Default for FeedingConfig {
    fn default() -> Self {
        Self {
            mode: FeedingMode::Continuous,
            per_week: 3,
            pulse_hours: 0.5,
            warmup_days: 28.0,
        }
    }
}

impl FeedingConfig {
    /// Pulse start times in `[t0, t1)`, at whole days.
    pub fn pulse_times(&self, t0: f64, t1: f64) -> Vec<f64> {
        let per = self.per_week.max(1);
        let offsets: Vec<f64> = (0..per).map(|i| (i * 7 / per) as f64).collect();
        let mut out = Vec::new();
        let mut week = (t0 / 7.0).floor();
        while week * 7.0 < t1 {
            for o in &offsets {
                let t = week * 7.0 + o;
                if t >= t0 && t < t1 {
                    out.push(t);
                }
            }
            week += 1.0;
        }
        out
    }
}

/// Known feed schedule over `[t0, t1)`: the manipulated feed and (in
/// continuous mode) all feeds as one entry per control interval at the exact
/// interval mean of the diet, pulses otherwise.
pub fn diet_schedule(
    plan: &DietPlan,
    feeding: &FeedingConfig,
    control_index: usize,
    interval: f64,
    t0: f64,
    t1: f64,
) -> FeedSchedule {
    let m = plan.phases[0].flows.len();
    let mut s = FeedSchedule::new(m);
    let n = ((t1 - t0) / interval).round() as usize;
    for k in 0..n {
        let a = t0 + k as f64 * interval;
        let mut f = plan.mean_flows(a, a + interval);
        if feeding.mode == FeedingMode::Impulsive {
            for (i, v) in f.iter_mut().enumerate() {
                if i != control_index {
                    *v = 0.0;
                }
            }
        }
        s.push(a, interval, f, FeedKind::Continuous);
    }
    if feeding.mode == FeedingMode::Impulsive {
        let tau = feeding.pulse_hours / 24.0;
        let times = feeding.pulse_times(t0, t1 + 7.0);
        for w in times.windows(2) {
            if w[0] >= t1 {
                break;
            }
            let mean = plan.mean_flows(w[0], w[1]);
            let dt = w[1] - w[0];
            let f: Vec<f64> = (0..m)
                .map(|i| if i == control_index { 0.0 } else { mean[i] * dt / tau })
                .collect();
            s.push(w[0], tau, f, FeedKind::Pulse);
        }
    }
    s
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Equilibrium {
    pub flows: Vec<f64>,
    pub x: Vec<f64>,
    pub y: OutputVector,
}

/// Steady state under constant `flows`: long simulation from `guess`, then
/// Newton on `f(x) = 0`.
pub fn equilibrium(model: &Digester, flows: &[f64], guess: &[f64]) -> Result<Vec<f64>, HarnessError> {
    let n = guess.len();
    let h = 0.25;
    let mut ws = Workspace::new(n, flows.len(), 0);
    let sub = vec![flows.to_vec(); 4000];
    let mut x = propagate(model, guess, &sub, 0.0, h, &mut ws)?;
    let mut f = vec![0.0; n];
    let mut jx = vec![0.0; n * n];
    let mut ju = vec![0.0; n * flows.len()];
    for _ in 0..20 {
        model.rhs(0.0, &x, flows, &mut f);
        let norm = f.iter().fold(0.0_f64, |a, v| a.max(v.abs()));
        if norm < 1e-12 {
            break;
        }
        model.jacobian(0.0, &x, flows, &mut jx, &mut ju);
        let j = DMatrix::from_row_slice(n, n, &jx);
        let Some(dx) = j.lu().solve(&DVector::from_column_slice(&f)) else {
            break;
        };
        let trial: Vec<f64> = x.iter().zip(dx.iter()).map(|(a, d)| (a - d).max(0.0)).collect();
        x = trial;
    }
    model.rhs(0.0, &x, flows, &mut f);
    if f.iter().any(|v| !v.is_finite() || v.abs() > 1e-6) {
        return Err(HarnessError::Simulation(IntegratorError::NonFiniteState { t: 0.0 }));
    }
    Ok(x)
}

/// Known disturbance, references and equilibria of a scenario.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct References {
    pub interval: f64,
    pub substeps: usize,
    /// Control steps of the scenario proper.
    pub n_steps: usize,
    /// Covers `[-warmup, (n_steps + extension) Tc)`.
    pub d_ref: FeedSchedule,
    /// Control-grid samples, `n_steps + extension + 1` entries.
    pub y_ref: Vec<OutputVector>,
    pub x_ref: Vec<Vec<f64>>,
    /// Manipulated diet flow per interval.
    pub u_ref: Vec<f64>,
    /// One equilibrium per steady phase.
    pub equilibria: Vec<Equilibrium>,
    /// Time mean of `y_ref` over the scenario proper.
    pub ybar: [f64; N_OUTPUTS],
}

impl References {
    pub fn x0(&self) -> &[f64] {
        &self.x_ref[0]
    }

    pub fn u0(&self) -> f64 {
        self.u_ref[0]
    }
}

/// Default equilibrium search start for the nominal parameter magnitudes.
pub fn default_guess(n: usize) -> Vec<f64> {
    let m = n - 6;
    let mut g = vec![2.0; m];
    g.extend([3.0, 2.0, 0.2, 4.0, 60.0, 140.0]);
    g
}

/// Simulate the nominal model under the diet. The scenario starts from
/// the first phase's equilibrium (after `warmup_days` of periodic feeding
/// in impulsive mode); `extension` extra intervals past the end keep
/// horizon predictions supplied with references.
#[allow(clippy::too_many_arguments)]
pub fn build_references(
    plan: &DietPlan,
    feeding: &FeedingConfig,
    model: &Digester,
    control_index: usize,
    interval: f64,
    substeps: usize,
    extension: usize,
) -> Result<References, HarnessError> {
    let m = model.config.n_feedstocks();
    plan.validate(m)?;
    if control_index >= m {
        return Err(HarnessError::Config("manipulated feedstock index out of range".into()));
    }
    let n = model.config.n_states();
    let n_steps = (plan.total_duration() / interval).round() as usize;
    if n_steps == 0 || ((n_steps as f64) * interval - plan.total_duration()).abs() > 1e-9 {
        return Err(HarnessError::Config(format!(
            "diet length {} d is not a multiple of the control interval",
            plan.total_duration()
        )));
    }
    let total = n_steps + extension;
    let t_end = total as f64 * interval;
    let warm = if feeding.mode == FeedingMode::Impulsive {
        (feeding.warmup_days / 7.0).ceil() * 7.0
    } else {
        0.0
    };
    let d_ref = diet_schedule(plan, feeding, control_index, interval, -warm, t_end);
    let h = interval / substeps as f64;

    let mut equilibria = Vec::new();
    let mut guess = default_guess(n);
    for p in &plan.phases {
        let x = equilibrium(model, &p.flows, &guess)?;
        equilibria.push(Equilibrium {
            flows: p.flows.clone(),
            y: model.outputs(0.0, &x),
            x: x.clone(),
        });
        guess = x;
    }
    let mut x = equilibria[0].x.clone();
    if warm > 0.0 {
        x = simulate_interval(model, &x, &d_ref, -warm, 0.0, h)?.final_state().to_vec();
    }
    let mut x_ref = vec![x.clone()];
    let mut y_ref = vec![model.outputs(0.0, &x)];
    let mut u_ref = Vec::with_capacity(total);
    for k in 0..total {
        let t0 = k as f64 * interval;
        let tr = simulate_interval(model, &x, &d_ref, t0, t0 + interval, h)?;
        x = tr.final_state().to_vec();
        y_ref.push(*tr.outputs.last().expect("nonempty"));
        x_ref.push(x.clone());
        u_ref.push(d_ref.delivered(t0, t0 + interval)[control_index] / interval);
    }
    let mut ybar = [0.0; N_OUTPUTS];
    for y in &y_ref[..=n_steps] {
        for (b, v) in ybar.iter_mut().zip(y.as_array()) {
            *b += v / (n_steps + 1) as f64;
        }
    }
    Ok(References {
        interval,
        substeps,
        n_steps,
        d_ref,
        y_ref,
        x_ref,
        u_ref,
        equilibria,
        ybar,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn plan() -> DietPlan {
        DietPlan {
            phases: vec![
                DietPhase {
                    duration: 10.0,
                    flows: vec![1.0, 2.0],
                },
                DietPhase {
                    duration: 5.0,
                    flows: vec![3.0, 0.0],
                },
            ],
            transition: 4.0,
        }
    }

    #[test]
    fn piecewise_linear_diet() {
        let p = plan();
        assert_eq!(p.total_duration(), 19.0);
        assert_eq!(p.flows_at(5.0), vec![1.0, 2.0]);
        assert_eq!(p.flows_at(12.0), vec![2.0, 1.0]);
        assert_eq!(p.flows_at(30.0), vec![3.0, 0.0]);
        let m = p.mean_flows(9.0, 11.0);
        assert!((m[0] - 1.125).abs() < 1e-12);
        assert_eq!(p.steady_windows(), vec![(0.0, 10.0), (14.0, 19.0)]);
        assert_eq!(p.transition_windows(), vec![(10.0, 14.0)]);
    }

    #[test]
    fn pulses_deliver_the_diet_volume() {
        let p = plan();
        let f = FeedingConfig {
            mode: FeedingMode::Impulsive,
            ..Default::default()
        };
        assert_eq!(f.pulse_times(0.0, 14.0), vec![0.0, 2.0, 4.0, 7.0, 9.0, 11.0]);
        let s = diet_schedule(&p, &f, 0, 0.25, 0.0, 14.0);
        let d = s.delivered(0.0, 14.0);
        let expect: f64 = (0..56).map(|k| p.mean_flows(k as f64 * 0.25, (k + 1) as f64 * 0.25)[1] * 0.25).sum();
        assert!((d[1] - expect).abs() < 1e-9, "{} vs {}", d[1], expect);
        assert!((d[0] - p.mean_flows(0.0, 14.0)[0] * 14.0).abs() < 1e-9);
    }
}
