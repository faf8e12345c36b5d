//! NMPC formulations and the override-PI baseline behind one step interface.
//!
//! Every controller is called once per control interval with the true plant
//! state and the (noisy) measured outputs, and returns the flow of the
//! manipulated feedstock to hold over the next interval.

mod nmpc;
mod pi;
mod tube;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{OutputVector, N_OUTPUTS};
use crate::nlp::{SolveStatus, TranscribeError};

pub use nmpc::{ClassicalNmpc, NmpcSetup, OcpOutcome};
pub use pi::{relay_autotune, OverridePi, PiGains, PiLoop, RelayResult};
pub use tube::{
    ancillary_step, nominal_solve, offline_tube_precompute, OfflineTube, OfflineTubeStore, OnlineTube,
    TubeConfig, TubeSolution,
};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ControllerError {
    #[error(transparent)]
    Transcribe(#[from] TranscribeError),
    #[error("nominal problem failed at step {step}: {status:?}")]
    Precompute { step: usize, status: SolveStatus },
    #[error("nominal sets must lie inside the ancillary sets: {0}")]
    SetsNotNested(String),
    #[error("invalid controller configuration: {0}")]
    Config(String),
}

/// Weights of the output tracking and ancillary costs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CostWeights {
    pub wy: [f64; N_OUTPUTS],
    pub ybar: [f64; N_OUTPUTS],
    pub wy_hp: f64,
    pub wx: f64,
    pub wu: f64,
}

impl CostWeights {
    pub fn new(ybar: [f64; N_OUTPUTS]) -> Self {
        Self {
            wy: [1.0; N_OUTPUTS],
            ybar,
            wy_hp: 90.0,
            wx: 1.0,
            wu: 9.0,
        }
    }

    /// Named ancillary weight presets `(wy_hp, wx, wu)`.
    pub fn with_preset(mut self, name: &str) -> Option<Self> {
        let (wy_hp, wx, wu) = match name {
            "test1" => (90.0, 1.0, 9.0),
            "test1b" => (1.0, 1.0, 0.1),
            _ => return None,
        };
        self.wy_hp = wy_hp;
        self.wu = wu;
        self.wx = wx;
        Some(self)
    }

    pub fn validate(&self) -> Result<(), ControllerError> {
        let all = self.wy.iter().chain([&self.wy_hp, &self.wx, &self.wu]);
        if all.into_iter().any(|w| !(*w >= 0.0) || !w.is_finite()) {
            return Err(ControllerError::Config("weights must be finite and nonnegative".into()));
        }
        if self.ybar.iter().any(|y| !(*y > 0.0)) {
            return Err(ControllerError::Config("ybar must be positive".into()));
        }
        Ok(())
    }

    /// `|W_y^(1/2) (y - r) / ybar|`.
    pub fn stage(&self, y: &OutputVector, r: &OutputVector) -> f64 {
        let e = [(y.qm - r.qm) / self.ybar[0], (y.ratio - r.ratio) / self.ybar[1]];
        (self.wy[0] * e[0] * e[0] + self.wy[1] * e[1] * e[1]).sqrt()
    }
}

/// Tracking cost `J = sum_t |W_y^(1/2) (y_t - y_ref,t) / ybar|`.
pub fn tracking_cost(y: &[OutputVector], y_ref: &[OutputVector], w: &CostWeights) -> f64 {
    assert_eq!(y.len(), y_ref.len(), "trajectories differ in length");
    y.iter().zip(y_ref).map(|(a, b)| w.stage(a, b)).sum()
}

/// Box sets on states, the manipulated input, and its moves.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConstraintSets {
    pub x_lb: Vec<f64>,
    pub x_ub: Vec<f64>,
    pub u_lb: f64,
    pub u_ub: f64,
    pub du_lb: f64,
    pub du_ub: f64,
}

impl ConstraintSets {
    /// `other` is contained in `self` elementwise.
    pub fn contains(&self, other: &ConstraintSets) -> bool {
        let states = self
            .x_lb
            .iter()
            .zip(&other.x_lb)
            .all(|(a, b)| a <= b)
            && self.x_ub.iter().zip(&other.x_ub).all(|(a, b)| a >= b);
        states
            && self.u_lb <= other.u_lb
            && self.u_ub >= other.u_ub
            && self.du_lb <= other.du_lb
            && self.du_ub >= other.du_ub
    }

    pub fn clamp_input(&self, u: f64, previous: f64) -> f64 {
        let lo = self.u_lb.max(previous + self.du_lb);
        let hi = self.u_ub.min(previous + self.du_ub);
        u.clamp(lo.min(hi), hi)
    }

    pub fn at_input_bound(&self, u: f64) -> bool {
        let tol = 1e-6 * (self.u_ub - self.u_lb).abs().max(1e-12);
        (u - self.u_lb).abs() <= tol || (u - self.u_ub).abs() <= tol
    }

    pub fn state_violation(&self, x: &[f64]) -> f64 {
        x.iter()
            .zip(self.x_lb.iter().zip(&self.x_ub))
            .map(|(v, (l, u))| (l - v).max(v - u).max(0.0))
            .fold(0.0, f64::max)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ControllerKind {
    Classical,
    OfflineTube,
    OnlineTube,
    OverridePi,
    OpenLoop,
}

impl ControllerKind {
    pub const ALL: [ControllerKind; 5] = [
        ControllerKind::Classical,
        ControllerKind::OfflineTube,
        ControllerKind::OnlineTube,
        ControllerKind::OverridePi,
        ControllerKind::OpenLoop,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ControllerKind::Classical => "classical",
            ControllerKind::OfflineTube => "offline-tube",
            ControllerKind::OnlineTube => "online-tube",
            ControllerKind::OverridePi => "override-pi",
            ControllerKind::OpenLoop => "open-loop",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|k| k.name() == s)
    }

    pub fn is_nmpc(self) -> bool {
        matches!(
            self,
            ControllerKind::Classical | ControllerKind::OfflineTube | ControllerKind::OnlineTube
        )
    }
}

impl std::fmt::Display for ControllerKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// What a controller sees at the start of an interval.
#[derive(Debug, Clone, Copy)]
pub struct StepInput<'a> {
    pub k: usize,
    pub t: f64,
    pub x: &'a [f64],
    pub y_meas: OutputVector,
}

/// Outcome of one control step.
#[derive(Debug, Clone, PartialEq, Default, Serialize)]
pub struct StepReport {
    pub input: f64,
    /// Status of the problem whose first move is applied.
    pub status: Option<SolveStatus>,
    pub iterations: usize,
    pub nominal_status: Option<SolveStatus>,
    /// Previous input held because no usable solution was found.
    pub fallback: bool,
    /// Largest slack, normalized by the state scale.
    pub slack_max: f64,
    /// First nominal input (tube formulations).
    pub nu0: Option<f64>,
    /// Re-optimized nominal initial state (online tube).
    pub z0_star: Option<Vec<f64>>,
}

impl StepReport {
    pub fn held(input: f64) -> Self {
        Self {
            input,
            ..Default::default()
        }
    }
}

pub trait Controller: Send {
    fn kind(&self) -> ControllerKind;
    fn step(&mut self, inp: &StepInput) -> Result<StepReport, ControllerError>;
    fn previous_input(&self) -> f64;
}

/// Diet target of the manipulated feedstock, no feedback.
#[derive(Debug, Clone)]
pub struct OpenLoop {
    pub schedule: crate::integrator::FeedSchedule,
    pub control_index: usize,
    pub interval: f64,
    previous: f64,
}

impl OpenLoop {
    pub fn new(schedule: crate::integrator::FeedSchedule, control_index: usize, interval: f64) -> Self {
        let previous = schedule.delivered(0.0, interval)[control_index] / interval;
        Self {
            schedule,
            control_index,
            interval,
            previous,
        }
    }
}

impl Controller for OpenLoop {
    fn kind(&self) -> ControllerKind {
        ControllerKind::OpenLoop
    }
    fn step(&mut self, inp: &StepInput) -> Result<StepReport, ControllerError> {
        let d = self.schedule.delivered(inp.t, inp.t + self.interval);
        self.previous = d[self.control_index] / self.interval;
        Ok(StepReport::held(self.previous))
    }
    fn previous_input(&self) -> f64 {
        self.previous
    }
}
