//! Scenario files and the prepared, immutable per-scenario context.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::{Arc, OnceLock};

use serde::{Deserialize, Serialize};

use crate::controllers::{
    offline_tube_precompute, relay_autotune, ClassicalNmpc, ConstraintSets, Controller, ControllerError,
    ControllerKind, CostWeights, NmpcSetup, OfflineTube, OfflineTubeStore, OnlineTube, OpenLoop, OverridePi,
    PiGains, TubeConfig,
};
use crate::model::{Digester, ModelParameters, StateLayout};
use crate::nlp::SolverOptions;

use super::references::{build_references, DietPlan, FeedingConfig, References};
use super::uncertainty::{KnockdownConfig, Realization, UncertaintyConfig};
use super::HarnessError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TimingConfig {
    /// Control interval, d.
    pub interval: f64,
    pub substeps: usize,
    pub horizon: usize,
    pub control_horizon: usize,
}

impl Default for TimingConfig {
    fn default() -> Self {
        Self {
            interval: 0.25,
            substeps: 12,
            horizon: 10,
            control_horizon: 2,
        }
    }
}

/// Bounds keyed by state name (`xt1.., x1, x2, s1, s2, c, z`); unnamed
/// states get `[0, inf)`.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct StateBounds {
    pub lower: BTreeMap<String, f64>,
    pub upper: BTreeMap<String, f64>,
}

impl StateBounds {
    pub fn resolve(&self, layout: StateLayout) -> Result<(Vec<f64>, Vec<f64>), HarnessError> {
        let names = layout.state_names();
        let mut lb = vec![0.0; names.len()];
        let mut ub = vec![f64::INFINITY; names.len()];
        for (map, out) in [(&self.lower, &mut lb), (&self.upper, &mut ub)] {
            for (k, v) in map {
                let i = names
                    .iter()
                    .position(|n| n == k)
                    .ok_or_else(|| HarnessError::Config(format!("unknown state '{k}' in bounds")))?;
                out[i] = *v;
            }
        }
        Ok((lb, ub))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct InputBounds {
    pub lb: f64,
    pub ub: f64,
    pub du_lb: f64,
    pub du_ub: f64,
}

impl Default for InputBounds {
    fn default() -> Self {
        Self {
            lb: 0.0,
            ub: 0.3,
            du_lb: -0.03,
            du_ub: 0.03,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct WeightsConfig {
    /// `test1` or `test1b`; explicit values below override it.
    pub preset: Option<String>,
    pub wy: [f64; 2],
    pub wy_hp: Option<f64>,
    pub wx: Option<f64>,
    pub wu: Option<f64>,
}

impl Default for WeightsConfig {
    fn default() -> Self {
        Self {
            preset: Some("test1".into()),
            wy: [1.0, 1.0],
            wy_hp: None,
            wx: None,
            wu: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PiConfig {
    /// Ratio setpoint relative to the first steady phase's ratio.
    pub ratio_margin: f64,
    /// Relay amplitude as a fraction of the initial manipulated flow.
    pub relay_amplitude: f64,
    pub relay_days: f64,
    /// Explicit gains skip the relay experiment.
    pub production: Option<PiGains>,
    pub safety: Option<PiGains>,
}

impl Default for PiConfig {
    fn default() -> Self {
        Self {
            ratio_margin: 0.10,
            relay_amplitude: 0.4,
            relay_days: 80.0,
            production: None,
            safety: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ControllerConfig {
    pub mode: ControllerKind,
    pub weights: WeightsConfig,
    /// `X`: classical and ancillary state set.
    pub state_set: StateBounds,
    /// `Z`: nominal state set.
    pub nominal_state_set: StateBounds,
    pub input: InputBounds,
    /// `V`, `DV`; defaults to `input`.
    pub nominal_input: Option<InputBounds>,
    /// Classical NMPC constrained by `Z` instead of `X`.
    pub classical_uses_nominal_set: bool,
    pub classical_slack: bool,
    pub nominal_slack: bool,
    pub ancillary_slack: bool,
    pub slack_weight: f64,
    /// Consecutive solver failures after which a run is aborted.
    pub max_consecutive_failures: usize,
    pub pi: PiConfig,
}

impl Default for ControllerConfig {
    fn default() -> Self {
        let mut upper = BTreeMap::new();
        upper.insert("s2".to_string(), 40.0);
        Self {
            mode: ControllerKind::Classical,
            weights: WeightsConfig::default(),
            state_set: StateBounds {
                lower: BTreeMap::new(),
                upper: upper.clone(),
            },
            nominal_state_set: StateBounds {
                lower: BTreeMap::new(),
                upper,
            },
            input: InputBounds::default(),
            nominal_input: None,
            classical_uses_nominal_set: false,
            classical_slack: false,
            nominal_slack: false,
            ancillary_slack: false,
            slack_weight: 1e4,
            max_consecutive_failures: 8,
            pi: PiConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverConfig {
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        let d = SolverOptions::default();
        Self {
            tol: d.tol,
            max_iter: d.max_iter,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputConfig {
    pub dir: Option<PathBuf>,
}

/// Initial state of the true plant in every run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PlantStart {
    /// The nominal model's initial state, shared by all runs.
    #[default]
    Nominal,
    /// Each plant's own steady state under the first diet phase.
    OwnEquilibrium,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub name: String,
    #[serde(default)]
    pub description: String,
    /// Parameter file, relative to the scenario file; built-in defaults
    /// when absent.
    #[serde(default)]
    pub parameters: Option<PathBuf>,
    /// Name of the manipulated feedstock; the parameter file's controllable
    /// one when absent.
    #[serde(default)]
    pub manipulated: Option<String>,
    #[serde(default)]
    pub timing: TimingConfig,
    pub diet: DietPlan,
    #[serde(default)]
    pub feeding: FeedingConfig,
    #[serde(default)]
    pub controller: ControllerConfig,
    #[serde(default)]
    pub uncertainty: UncertaintyConfig,
    #[serde(default)]
    pub knockdown: KnockdownConfig,
    #[serde(default)]
    pub plant_start: PlantStart,
    #[serde(default)]
    pub solver: SolverConfig,
    #[serde(default)]
    pub output: OutputConfig,
}

impl Scenario {
    pub fn from_toml_str(text: &str) -> Result<Self, HarnessError> {
        toml::from_str(text).map_err(|e| HarnessError::Parse(e.to_string()))
    }

    pub fn from_file(path: &Path) -> Result<Self, HarnessError> {
        let text = std::fs::read_to_string(path).map_err(|e| HarnessError::Io {
            path: path.to_path_buf(),
            message: e.to_string(),
        })?;
        Self::from_toml_str(&text).map_err(|e| match e {
            HarnessError::Parse(m) => HarnessError::Parse(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string_pretty(self).expect("scenario serializes")
    }

    /// Drop all randomness: exact plant, no noise, no knockdown, one run.
    pub fn without_uncertainty(mut self) -> Self {
        self.uncertainty = UncertaintyConfig {
            seed: self.uncertainty.seed,
            ..UncertaintyConfig::none()
        };
        self.knockdown.enabled = false;
        self
    }

    pub fn weights(&self, ybar: [f64; 2]) -> Result<CostWeights, HarnessError> {
        let wc = &self.controller.weights;
        let mut w = CostWeights::new(ybar);
        if let Some(p) = &wc.preset {
            w = w
                .with_preset(p)
                .ok_or_else(|| HarnessError::Config(format!("unknown weight preset '{p}'")))?;
        }
        w.wy = wc.wy;
        w.wy_hp = wc.wy_hp.unwrap_or(w.wy_hp);
        w.wx = wc.wx.unwrap_or(w.wx);
        w.wu = wc.wu.unwrap_or(w.wu);
        w.validate()?;
        Ok(w)
    }
}

/// Gains and setpoint of the override-PI scheme.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PiTuning {
    pub production: PiGains,
    pub safety: PiGains,
    pub ratio_setpoint: f64,
}

/// A scenario with its nominal model, references and shared controller
/// data, ready for closed-loop runs.
pub struct ScenarioContext {
    pub scenario: Scenario,
    pub nominal: Digester,
    pub control_index: usize,
    pub references: References,
    pub setup: Arc<NmpcSetup>,
    pub weights: CostWeights,
    /// `X, U, DU`.
    pub sets: ConstraintSets,
    /// `Z, V, DV`.
    pub nominal_sets: ConstraintSets,
    offline: OnceLock<Result<Arc<OfflineTubeStore>, ControllerError>>,
    pi: OnceLock<Result<PiTuning, ControllerError>>,
}

fn input_sets(x: (Vec<f64>, Vec<f64>), u: &InputBounds) -> ConstraintSets {
    ConstraintSets {
        x_lb: x.0,
        x_ub: x.1,
        u_lb: u.lb,
        u_ub: u.ub,
        du_lb: u.du_lb,
        du_ub: u.du_ub,
    }
}

impl ScenarioContext {
    /// `base_dir` resolves a relative parameter path.
    pub fn new(scenario: Scenario, base_dir: Option<&Path>) -> Result<Self, HarnessError> {
        let params = match &scenario.parameters {
            Some(p) => {
                let path = match base_dir {
                    Some(b) if p.is_relative() => b.join(p),
                    _ => p.clone(),
                };
                ModelParameters::from_file(&path).map_err(|e| HarnessError::Parse(format!("{}: {e}", path.display())))?
            }
            None => ModelParameters::default_set(),
        };
        Self::with_model(scenario, params.digester())
    }

    /// Context around an already loaded nominal model.
    pub fn with_model(scenario: Scenario, nominal: Digester) -> Result<Self, HarnessError> {
        let cfg = &nominal.config;
        let control_index = match &scenario.manipulated {
            Some(name) => cfg
                .feedstock_index(name)
                .ok_or_else(|| HarnessError::Config(format!("unknown feedstock '{name}'")))?,
            None => cfg.controllable()[0],
        };
        let t = &scenario.timing;
        if !(t.interval > 0.0) || t.substeps == 0 || t.control_horizon == 0 || t.control_horizon >= t.horizon {
            return Err(HarnessError::Config("timing needs Tc > 0, substeps > 0, 0 < Hc < Hp".into()));
        }
        if scenario.uncertainty.n_runs == 0 {
            return Err(HarnessError::Config("n_runs must be at least 1".into()));
        }
        let references = build_references(
            &scenario.diet,
            &scenario.feeding,
            &nominal,
            control_index,
            t.interval,
            t.substeps,
            2 * t.horizon + 2,
        )?;
        let weights = scenario.weights(references.ybar)?;
        let layout = cfg.layout();
        let c = &scenario.controller;
        let sets = input_sets(c.state_set.resolve(layout)?, &c.input);
        let nominal_sets = input_sets(
            c.nominal_state_set.resolve(layout)?,
            c.nominal_input.as_ref().unwrap_or(&c.input),
        );
        let x0 = references.x0();
        let state_scale: Vec<f64> = x0.iter().map(|v| v.abs().max(1e-2)).collect();
        let setup = NmpcSetup {
            model: nominal.clone(),
            interval: t.interval,
            substeps: t.substeps,
            horizon: t.horizon,
            control_horizon: t.control_horizon,
            control_index,
            d_ref: references.d_ref.clone(),
            y_ref: references.y_ref.clone(),
            state_scale,
            input_scale: (c.input.ub - c.input.lb).abs().max(1e-6),
            state_guess: x0.to_vec(),
            solver: SolverOptions {
                tol: scenario.solver.tol,
                max_iter: scenario.solver.max_iter,
                ..Default::default()
            },
            slack_weight: c.slack_weight,
        };
        Ok(Self {
            scenario,
            nominal,
            control_index,
            references,
            setup: Arc::new(setup),
            weights,
            sets,
            nominal_sets,
            offline: OnceLock::new(),
            pi: OnceLock::new(),
        })
    }

    pub fn from_file(path: &Path) -> Result<Self, HarnessError> {
        let s = Scenario::from_file(path)?;
        Self::new(s, path.parent())
    }

    /// Same scenario and model with other controller weights.
    pub fn with_weights(&self, weights: WeightsConfig) -> Result<Self, HarnessError> {
        let mut s = self.scenario.clone();
        s.controller.weights = weights;
        Self::with_model(s, self.nominal.clone())
    }

    pub fn n_steps(&self) -> usize {
        self.references.n_steps
    }

    pub fn tube_config(&self) -> TubeConfig {
        let c = &self.scenario.controller;
        TubeConfig {
            ancillary_sets: self.sets.clone(),
            nominal_sets: self.nominal_sets.clone(),
            weights: self.weights.clone(),
            nominal_slack: c.nominal_slack,
            ancillary_slack: c.ancillary_slack,
            stage_weight: 0.0,
        }
    }

    pub fn classical_sets(&self) -> ConstraintSets {
        if self.scenario.controller.classical_uses_nominal_set {
            let mut s = self.nominal_sets.clone();
            s.u_lb = self.sets.u_lb;
            s.u_ub = self.sets.u_ub;
            s.du_lb = self.sets.du_lb;
            s.du_ub = self.sets.du_ub;
            s
        } else {
            self.sets.clone()
        }
    }

    /// Knockdown center: middle of the first diet transition, or of the
    /// scenario when the diet has none.
    pub fn knockdown_center(&self) -> f64 {
        let plan = &self.scenario.diet;
        match plan.transition_windows().first() {
            Some((a, b)) => 0.5 * (a + b),
            None => 0.5 * plan.total_duration(),
        }
    }

    pub fn realization(&self, run_index: u64) -> Realization {
        Realization::draw(
            &self.nominal.params,
            &self.scenario.uncertainty,
            Some((&self.scenario.knockdown, self.knockdown_center())),
            run_index,
        )
    }

    /// Stitched nominal loop, computed once and shared.
    pub fn offline_store(&self) -> Result<Arc<OfflineTubeStore>, ControllerError> {
        self.offline
            .get_or_init(|| {
                offline_tube_precompute(
                    &self.setup,
                    &self.tube_config(),
                    self.n_steps(),
                    self.references.x0(),
                    self.references.u0(),
                )
                .map(Arc::new)
            })
            .clone()
    }

    /// Relay-tuned (or configured) override-PI gains.
    pub fn pi_tuning(&self) -> Result<PiTuning, ControllerError> {
        self.pi
            .get_or_init(|| {
                let pc = &self.scenario.controller.pi;
                let eq = &self.references.equilibria[0];
                let t = &self.scenario.timing;
                let amp = pc.relay_amplitude * self.references.u0();
                let relay = |channel| {
                    relay_autotune(
                        &self.nominal,
                        &eq.x,
                        &eq.flows,
                        self.control_index,
                        amp,
                        channel,
                        t.interval,
                        t.substeps,
                        pc.relay_days,
                    )
                    .map(|r| r.gains)
                };
                let production = match pc.production {
                    Some(g) => g,
                    None => relay(0)?,
                };
                // The override always cuts the feed on a rising ratio; only the
                // magnitude comes from the relay test.
                let safety = match pc.safety {
                    Some(g) => g,
                    None => relay(1).map(|g| PiGains { kp: g.kp.abs(), ..g })?,
                };
                Ok(PiTuning {
                    production,
                    safety,
                    ratio_setpoint: eq.y.ratio * (1.0 + pc.ratio_margin),
                })
            })
            .clone()
    }

    /// Fresh controller of the given kind, starting from the diet input.
    pub fn controller(&self, kind: ControllerKind) -> Result<Box<dyn Controller>, ControllerError> {
        let u0 = self.references.u0();
        let c = &self.scenario.controller;
        Ok(match kind {
            ControllerKind::Classical => Box::new(ClassicalNmpc::new(
                self.setup.clone(),
                self.classical_sets(),
                self.weights.clone(),
                c.classical_slack,
                u0,
            )?),
            ControllerKind::OfflineTube => Box::new(OfflineTube::new(
                self.setup.clone(),
                self.tube_config(),
                self.offline_store()?,
                u0,
            )?),
            ControllerKind::OnlineTube => Box::new(OnlineTube::new(
                self.setup.clone(),
                self.tube_config(),
                self.references.x0().to_vec(),
                u0,
            )?),
            ControllerKind::OverridePi => {
                let p = self.pi_tuning()?;
                Box::new(OverridePi::new(
                    p.production,
                    p.safety,
                    p.ratio_setpoint,
                    self.references.y_ref.iter().map(|y| y.qm).collect(),
                    self.sets.clone(),
                    self.setup.interval,
                    u0,
                )?)
            }
            ControllerKind::OpenLoop => Box::new(OpenLoop::new(
                self.references.d_ref.clone(),
                self.control_index,
                self.setup.interval,
            )),
        })
    }
}
