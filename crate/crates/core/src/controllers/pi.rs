use serde::{Deserialize, Serialize};

use crate::integrator::{propagate, Workspace};
use crate::model::{Digester, ProcessModel};

use super::{ConstraintSets, Controller, ControllerError, ControllerKind, StepInput, StepReport};

/// `u = I + kp e`, `I += kp dt / ti e`. An infinite `ti` disables the
/// integral action.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PiGains {
    pub kp: f64,
    pub ti: f64,
}

/// A PI loop whose integrator is clamped to the input range.
#[derive(Debug, Clone, PartialEq)]
pub struct PiLoop {
    pub gains: PiGains,
    pub integral: f64,
    pub lo: f64,
    pub hi: f64,
}

impl PiLoop {
    pub fn new(gains: PiGains, initial: f64, lo: f64, hi: f64) -> Self {
        Self {
            gains,
            integral: initial.clamp(lo, hi),
            lo,
            hi,
        }
    }

    pub fn update(&mut self, error: f64, dt: f64) -> f64 {
        let PiGains { kp, ti } = self.gains;
        if ti.is_finite() && ti > 0.0 {
            self.integral = (self.integral + kp * dt / ti * error).clamp(self.lo, self.hi);
        }
        self.integral + kp * error
    }
}

/// Low-select override of a production loop on `q_M` and a safety loop on
/// the CO2/CH4 ratio.
pub struct OverridePi {
    pub production: PiLoop,
    pub safety: PiLoop,
    pub ratio_setpoint: f64,
    qm_ref: Vec<f64>,
    sets: ConstraintSets,
    interval: f64,
    previous: f64,
}

impl OverridePi {
    /// The production integrator starts at `initial_input`, the safety one
    /// at the upper input bound so it stays inactive until the ratio rises.
    pub fn new(
        production: PiGains,
        safety: PiGains,
        ratio_setpoint: f64,
        qm_ref: Vec<f64>,
        sets: ConstraintSets,
        interval: f64,
        initial_input: f64,
    ) -> Result<Self, ControllerError> {
        for g in [production, safety] {
            if !g.kp.is_finite() || g.ti.is_nan() || g.ti <= 0.0 {
                return Err(ControllerError::Config(format!("invalid PI gains {g:?}")));
            }
        }
        if qm_ref.is_empty() {
            return Err(ControllerError::Config("empty q_M reference".into()));
        }
        Ok(Self {
            production: PiLoop::new(production, initial_input, sets.u_lb, sets.u_ub),
            safety: PiLoop::new(safety, sets.u_ub, sets.u_lb, sets.u_ub),
            ratio_setpoint,
            qm_ref,
            sets,
            interval,
            previous: initial_input,
        })
    }
}

impl Controller for OverridePi {
    fn kind(&self) -> ControllerKind {
        ControllerKind::OverridePi
    }

    fn step(&mut self, inp: &StepInput) -> Result<StepReport, ControllerError> {
        let r = self.qm_ref[inp.k.min(self.qm_ref.len() - 1)];
        let u1 = self.production.update(r - inp.y_meas.qm, self.interval);
        let u2 = self.safety.update(self.ratio_setpoint - inp.y_meas.ratio, self.interval);
        let u = self.sets.clamp_input(u1.min(u2), self.previous);
        self.previous = u;
        Ok(StepReport::held(u))
    }

    fn previous_input(&self) -> f64 {
        self.previous
    }
}

/// Relay experiment summary and the Tyreus-Luyben PI gains.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RelayResult {
    pub ultimate_gain: f64,
    pub ultimate_period: f64,
    pub amplitude: f64,
    /// Sign of the short-term response of the output to the input.
    pub process_sign: f64,
    pub gains: PiGains,
}

/// Relay feedback test around the steady state `x0` (outputs sampled and
/// the relay switched once per interval). `channel` 0 is `q_M`, 1 the ratio.
#[allow(clippy::too_many_arguments)]
pub fn relay_autotune(
    model: &Digester,
    x0: &[f64],
    flows: &[f64],
    control_index: usize,
    amplitude: f64,
    channel: usize,
    interval: f64,
    substeps: usize,
    duration: f64,
) -> Result<RelayResult, ControllerError> {
    let n = x0.len();
    let h = interval / substeps as f64;
    let mut ws = Workspace::new(n, flows.len(), 0);
    let read = |x: &[f64]| model.outputs(0.0, x).as_array()[channel];
    let y0 = read(x0);
    let u0 = flows[control_index];
    let run = |x: &[f64], u: f64, steps: usize, ws: &mut Workspace| {
        let mut f = flows.to_vec();
        f[control_index] = u;
        let sub = vec![f; substeps * steps];
        propagate(model, x, &sub, 0.0, h, ws)
    };
    let probe = run(x0, u0 + amplitude, 8, &mut ws).map_err(|e| ControllerError::Config(e.to_string()))?;
    let sign = if read(&probe) >= y0 { 1.0 } else { -1.0 };

    let steps = (duration / interval).round() as usize;
    let mut x = x0.to_vec();
    let mut ys = Vec::with_capacity(steps);
    for _ in 0..steps {
        let y = read(&x);
        ys.push(y);
        let u = u0 + amplitude * sign * (y0 - y).signum();
        x = run(&x, u, 1, &mut ws).map_err(|e| ControllerError::Config(e.to_string()))?;
    }
    let tail = &ys[steps / 2..];
    let (lo, hi) = tail.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), y| (a.min(*y), b.max(*y)));
    let a = 0.5 * (hi - lo);
    let mid = 0.5 * (hi + lo);
    let ups: Vec<usize> = (1..tail.len()).filter(|&i| tail[i - 1] < mid && tail[i] >= mid).collect();
    if ups.len() < 3 || !(a > 0.0) {
        return Err(ControllerError::Config(format!(
            "relay test on output {channel} did not settle into an oscillation"
        )));
    }
    let period = (ups[ups.len() - 1] - ups[0]) as f64 * interval / (ups.len() - 1) as f64;
    let ku = 4.0 * amplitude / (std::f64::consts::PI * a);
    Ok(RelayResult {
        ultimate_gain: ku,
        ultimate_period: period,
        amplitude: a,
        process_sign: sign,
        gains: PiGains {
            kp: sign * ku / 3.2,
            ti: 2.2 * period,
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::OutputVector;

    fn sets() -> ConstraintSets {
        ConstraintSets {
            x_lb: vec![],
            x_ub: vec![],
            u_lb: 0.0,
            u_ub: 0.3,
            du_lb: -0.03,
            du_ub: 0.03,
        }
    }

    fn input(k: usize, qm: f64, ratio: f64) -> (usize, OutputVector) {
        (k, OutputVector { qm, ratio })
    }

    fn step(pi: &mut OverridePi, (k, y): (usize, OutputVector)) -> f64 {
        let x = [0.0];
        pi.step(&StepInput {
            k,
            t: k as f64 * 0.25,
            x: &x,
            y_meas: y,
        })
        .unwrap()
        .input
    }

    #[test]
    fn equilibrium_holds_input() {
        let g = PiGains { kp: 0.01, ti: 2.0 };
        let mut pi = OverridePi::new(g, g, 0.8, vec![20.0], sets(), 0.25, 0.1).unwrap();
        for k in 0..5 {
            assert_eq!(step(&mut pi, input(k, 20.0, 0.8)), 0.1);
        }
    }

    #[test]
    fn proportional_offset() {
        let p = PiGains {
            kp: 0.004,
            ti: f64::INFINITY,
        };
        let mut l = PiLoop::new(p, 0.1, 0.0, 0.3);
        assert_eq!(l.update(1.0, 0.25), 0.1 + 0.004);
        assert_eq!(l.update(-2.5, 0.25), 0.1 - 0.01);
    }

    #[test]
    fn high_ratio_cuts_feed() {
        let g = PiGains { kp: 0.02, ti: 1.0 };
        let mut pi = OverridePi::new(g, g, 0.8, vec![20.0], sets(), 0.25, 0.1).unwrap();
        let mut u = 0.1;
        for k in 0..40 {
            u = step(&mut pi, input(k, 20.0, 3.0));
        }
        assert_eq!(u, 0.0);
        assert!(pi.safety.integral >= 0.0);
    }

    #[test]
    fn integrator_is_clamped() {
        let g = PiGains { kp: 1.0, ti: 0.1 };
        let mut l = PiLoop::new(g, 0.1, 0.0, 0.3);
        for _ in 0..100 {
            l.update(10.0, 0.25);
        }
        assert_eq!(l.integral, 0.3);
    }
}
