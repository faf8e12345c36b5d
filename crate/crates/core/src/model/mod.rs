//! Reduced-order co-digestion model.
//!
//! The state carries one biodegradable-solids concentration per feedstock,
//! followed by acidogen and methanogen biomass, the acidogenesis substrate,
//! total VFA, dissolved inorganic carbon and total alkalinity:
//!
//! ```text
//! [xt_1 .. xt_m, x1, x2, s1, s2, c, z]      (n = m + 6)
//! ```
//!
//! Dynamics follow a CSTR balance `dx/dt = D (x_in - x) + K_G r(x) - q_C e_c`
//! where the inlet mixing term is written in its flow-weighted form
//! `D x_in = sum_i u_i theta_i / V`, which stays defined when every flow is 0.

mod params;

pub use params::{default_parameter_toml, ModelParameters, ParameterError};

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Flow below which the CO2/CH4 ratio is reported as [`RATIO_CAP`] (mmol/L/d).
pub const QM_EPS: f64 = 1e-9;

/// Ratio reported when methane production vanishes.
pub const RATIO_CAP: f64 = 10.0;

/// Number of measured outputs: methane flow rate and CO2/CH4 ratio.
pub const N_OUTPUTS: usize = 2;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("all feed flows are zero; inlet concentration is undefined")]
    AllFlowsZero,
    #[error("expected {expected} flows, got {got}")]
    FlowCount { expected: usize, got: usize },
    #[error("negative flow {value} for feedstock {index}")]
    NegativeFlow { index: usize, value: f64 },
}

/// Inlet characterization of one co-feedstock.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeedstockSpec {
    pub name: String,
    /// Inlet concentration for every state entry, in the state's own unit.
    pub theta_u: Vec<f64>,
    /// Total COD of the feedstock (g_COD/L), including the non-biodegradable
    /// fraction. Only used for organic loading rate bookkeeping.
    pub cod: f64,
    pub controllable: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReactorConfig {
    /// Liquid volume, L.
    pub volume: f64,
    pub feedstocks: Vec<FeedstockSpec>,
}

impl ReactorConfig {
    pub fn n_feedstocks(&self) -> usize {
        self.feedstocks.len()
    }

    pub fn layout(&self) -> StateLayout {
        StateLayout::new(self.n_feedstocks())
    }

    pub fn n_states(&self) -> usize {
        self.n_feedstocks() + 6
    }

    /// Indices of the feedstocks whose flow is a control action.
    pub fn controllable(&self) -> Vec<usize> {
        self.feedstocks
            .iter()
            .enumerate()
            .filter(|(_, f)| f.controllable)
            .map(|(i, _)| i)
            .collect()
    }

    pub fn feedstock_index(&self, name: &str) -> Option<usize> {
        self.feedstocks.iter().position(|f| f.name == name)
    }

    /// Organic loading rate (g_COD/L/d) and per-feedstock shares.
    pub fn organic_loading_rate(&self, flows: &[f64]) -> (f64, Vec<f64>) {
        let parts: Vec<f64> = flows
            .iter()
            .zip(&self.feedstocks)
            .map(|(u, f)| u * f.cod / self.volume)
            .collect();
        let total: f64 = parts.iter().sum();
        let shares = parts
            .iter()
            .map(|p| if total > 0.0 { p / total } else { 0.0 })
            .collect();
        (total, shares)
    }
}

/// Index map of the state vector for `m` feedstocks.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StateLayout {
    pub m: usize,
}

impl StateLayout {
    pub const fn new(m: usize) -> Self {
        Self { m }
    }
    pub const fn n(&self) -> usize {
        self.m + 6
    }
    pub const fn xt(&self, i: usize) -> usize {
        i
    }
    pub const fn x1(&self) -> usize {
        self.m
    }
    pub const fn x2(&self) -> usize {
        self.m + 1
    }
    pub const fn s1(&self) -> usize {
        self.m + 2
    }
    pub const fn s2(&self) -> usize {
        self.m + 3
    }
    pub const fn c(&self) -> usize {
        self.m + 4
    }
    pub const fn z(&self) -> usize {
        self.m + 5
    }

    pub fn state_names(&self) -> Vec<String> {
        let mut names: Vec<String> = (0..self.m).map(|i| format!("xt{}", i + 1)).collect();
        names.extend(["x1", "x2", "s1", "s2", "c", "z"].iter().map(|s| s.to_string()));
        names
    }
}

/// Digester state, `n = m + 6` entries, all nonnegative.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StateVector(pub Vec<f64>);

impl StateVector {
    pub fn zeros(layout: StateLayout) -> Self {
        Self(vec![0.0; layout.n()])
    }
    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }
    pub fn is_nonnegative(&self) -> bool {
        self.0.iter().all(|v| *v >= 0.0)
    }
    pub fn s2(&self, layout: StateLayout) -> f64 {
        self.0[layout.s2()]
    }
    pub fn x2(&self, layout: StateLayout) -> f64 {
        self.0[layout.x2()]
    }
}

/// Measured outputs.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct OutputVector {
    /// Methane flow rate, mmol/L/d.
    pub qm: f64,
    /// CO2/CH4 mole ratio.
    pub ratio: f64,
}

impl OutputVector {
    pub fn as_array(&self) -> [f64; N_OUTPUTS] {
        [self.qm, self.ratio]
    }
    pub fn from_array(a: [f64; N_OUTPUTS]) -> Self {
        Self { qm: a[0], ratio: a[1] }
    }
}

/// Stoichiometric and kinetic constants.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KineticParams {
    pub mu_max1: f64,
    pub mu_max2: f64,
    pub ks1: f64,
    /// Same unit as s2 (mmol/L).
    pub ks2: f64,
    /// Same unit as s2 (mmol/L).
    pub ki2: f64,
    pub k_hyd: Vec<f64>,
    pub k1: f64,
    pub k2: f64,
    pub k3: f64,
    pub k4: f64,
    pub k5: f64,
    pub k6: f64,
    pub kla: f64,
    pub kh_pc: f64,
}

impl KineticParams {
    /// The uncertain Haldane/Monod subset `[mu_max1, mu_max2, ks1, ks2, ki2]`.
    pub fn kinetic_subset(&self) -> [f64; 5] {
        [self.mu_max1, self.mu_max2, self.ks1, self.ks2, self.ki2]
    }

    pub fn with_kinetic_subset(&self, v: [f64; 5]) -> Self {
        Self {
            mu_max1: v[0],
            mu_max2: v[1],
            ks1: v[2],
            ks2: v[3],
            ki2: v[4],
            ..self.clone()
        }
    }

    /// Same constants with every reaction and transfer rate switched off.
    pub fn transport_only(&self) -> Self {
        Self {
            mu_max1: 0.0,
            mu_max2: 0.0,
            k_hyd: vec![0.0; self.k_hyd.len()],
            kla: 0.0,
            ..self.clone()
        }
    }

    pub fn validate(&self, m: usize) -> Result<(), ParameterError> {
        let named = [
            ("mu_max1", self.mu_max1),
            ("mu_max2", self.mu_max2),
            ("ks1", self.ks1),
            ("ks2", self.ks2),
            ("ki2", self.ki2),
            ("k1", self.k1),
            ("k2", self.k2),
            ("k3", self.k3),
            ("k4", self.k4),
            ("k5", self.k5),
            ("k6", self.k6),
            ("kla", self.kla),
            ("kh_pc", self.kh_pc),
        ];
        for (name, v) in named {
            if !(v.is_finite() && v > 0.0) {
                return Err(ParameterError::NotPositive(name.to_string(), v));
            }
        }
        if self.k_hyd.len() != m {
            return Err(ParameterError::Shape(format!(
                "k_hyd has {} entries, reactor has {m} feedstocks",
                self.k_hyd.len()
            )));
        }
        for (i, v) in self.k_hyd.iter().enumerate() {
            if !(v.is_finite() && *v > 0.0) {
                return Err(ParameterError::NotPositive(format!("k_hyd[{i}]"), *v));
            }
        }
        Ok(())
    }
}

/// Flow-weighted inlet concentration.
pub fn inlet_mix(flows: &[f64], specs: &[FeedstockSpec]) -> Result<StateVector, ModelError> {
    if flows.len() != specs.len() {
        return Err(ModelError::FlowCount {
            expected: specs.len(),
            got: flows.len(),
        });
    }
    if let Some((index, &value)) = flows.iter().enumerate().find(|(_, u)| **u < 0.0) {
        return Err(ModelError::NegativeFlow { index, value });
    }
    let total: f64 = flows.iter().sum();
    if total <= 0.0 {
        return Err(ModelError::AllFlowsZero);
    }
    let n = specs.first().map_or(0, |s| s.theta_u.len());
    let mut x = vec![0.0; n];
    for (u, spec) in flows.iter().zip(specs) {
        for (xi, th) in x.iter_mut().zip(&spec.theta_u) {
            *xi += u * th;
        }
    }
    x.iter_mut().for_each(|v| *v /= total);
    Ok(StateVector(x))
}

pub fn dilution_rate(flows: &[f64], volume: f64) -> f64 {
    flows.iter().sum::<f64>() / volume
}

/// Monod growth rate of acidogens.
pub fn mu1(s1: f64, p: &KineticParams) -> f64 {
    if s1 <= 0.0 {
        return 0.0;
    }
    p.mu_max1 * s1 / (s1 + p.ks1)
}

fn dmu1(s1: f64, p: &KineticParams) -> f64 {
    if s1 <= 0.0 {
        return 0.0;
    }
    p.mu_max1 * p.ks1 / ((s1 + p.ks1) * (s1 + p.ks1))
}

/// Haldane growth rate of methanogens.
pub fn mu2(s2: f64, p: &KineticParams) -> f64 {
    if s2 <= 0.0 {
        return 0.0;
    }
    p.mu_max2 * s2 / (s2 + p.ks2 + s2 * s2 / p.ki2)
}

fn dmu2(s2: f64, p: &KineticParams) -> f64 {
    if s2 <= 0.0 {
        return 0.0;
    }
    let den = s2 + p.ks2 + s2 * s2 / p.ki2;
    p.mu_max2 * (p.ks2 - s2 * s2 / p.ki2) / (den * den)
}

/// Reaction rates `[hydrolysis_1..m, acidogen growth, methanogen growth]`.
pub fn reaction_rates(x: &[f64], layout: StateLayout, p: &KineticParams) -> Vec<f64> {
    let mut r: Vec<f64> = (0..layout.m).map(|i| p.k_hyd[i] * x[layout.xt(i)]).collect();
    r.push(mu1(x[layout.s1()], p) * x[layout.x1()]);
    r.push(mu2(x[layout.s2()], p) * x[layout.x2()]);
    r
}

/// Gas-phase CO2 transfer rate, mmol/L/d.
pub fn co2_transfer(c: f64, p: &KineticParams) -> f64 {
    p.kla * (c - p.kh_pc).max(0.0)
}

/// Reactor model: configuration plus kinetic constants.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Digester {
    pub config: ReactorConfig,
    pub params: KineticParams,
}

impl Digester {
    pub fn new(config: ReactorConfig, params: KineticParams) -> Self {
        Self { config, params }
    }

    pub fn layout(&self) -> StateLayout {
        self.config.layout()
    }
}

/// `qm = k6 mu2(s2) x2`, `ratio = q_C / qm` with a cap for vanishing `qm`.
pub fn outputs_with(x: &[f64], layout: StateLayout, p: &KineticParams) -> OutputVector {
    let qm = p.k6 * mu2(x[layout.s2()], p) * x[layout.x2()];
    let qc = co2_transfer(x[layout.c()], p);
    let ratio = if qm < QM_EPS { RATIO_CAP } else { qc / qm };
    OutputVector { qm, ratio }
}

/// Evaluate `dx/dt` in place.
pub fn rhs_with(
    x: &[f64],
    flows: &[f64],
    cfg: &ReactorConfig,
    p: &KineticParams,
    dx: &mut [f64],
) {
    let l = cfg.layout();
    let inv_v = 1.0 / cfg.volume;
    let d: f64 = flows.iter().sum::<f64>() * inv_v;
    for (i, xi) in x.iter().enumerate() {
        dx[i] = -d * xi;
    }
    for (u, spec) in flows.iter().zip(&cfg.feedstocks) {
        if *u != 0.0 {
            let w = u * inv_v;
            for (dxi, th) in dx.iter_mut().zip(&spec.theta_u) {
                *dxi += w * th;
            }
        }
    }
    let mut hyd_total = 0.0;
    for i in 0..l.m {
        let h = p.k_hyd[i] * x[l.xt(i)];
        dx[l.xt(i)] -= h;
        hyd_total += h;
    }
    let r1 = mu1(x[l.s1()], p) * x[l.x1()];
    let r2 = mu2(x[l.s2()], p) * x[l.x2()];
    dx[l.x1()] += r1;
    dx[l.x2()] += r2;
    dx[l.s1()] += hyd_total - p.k1 * r1;
    dx[l.s2()] += p.k2 * r1 - p.k3 * r2;
    dx[l.c()] += p.k4 * r1 + p.k5 * r2 - co2_transfer(x[l.c()], p);
}

/// Jacobians of `dx/dt`: `jx` is n x n row-major, `ju` is n x m row-major
/// (derivative with respect to each feedstock flow).
pub fn jacobian_with(
    x: &[f64],
    flows: &[f64],
    cfg: &ReactorConfig,
    p: &KineticParams,
    jx: &mut [f64],
    ju: &mut [f64],
) {
    let l = cfg.layout();
    let n = l.n();
    let m = l.m;
    let inv_v = 1.0 / cfg.volume;
    let d: f64 = flows.iter().sum::<f64>() * inv_v;
    jx.iter_mut().for_each(|v| *v = 0.0);
    for i in 0..n {
        jx[i * n + i] = -d;
    }
    for (j, spec) in cfg.feedstocks.iter().enumerate() {
        for i in 0..n {
            ju[i * m + j] = (spec.theta_u[i] - x[i]) * inv_v;
        }
    }
    for i in 0..m {
        let k = p.k_hyd[i];
        jx[l.xt(i) * n + l.xt(i)] -= k;
        jx[l.s1() * n + l.xt(i)] += k;
    }
    let s1 = x[l.s1()];
    let s2 = x[l.s2()];
    let (m1, dm1) = (mu1(s1, p), dmu1(s1, p));
    let (m2, dm2) = (mu2(s2, p), dmu2(s2, p));
    // d r1 / d(x1, s1), d r2 / d(x2, s2)
    let r1_x1 = m1;
    let r1_s1 = dm1 * x[l.x1()];
    let r2_x2 = m2;
    let r2_s2 = dm2 * x[l.x2()];
    let mut add_r1 = |row: usize, coef: f64| {
        jx[row * n + l.x1()] += coef * r1_x1;
        jx[row * n + l.s1()] += coef * r1_s1;
    };
    add_r1(l.x1(), 1.0);
    add_r1(l.s1(), -p.k1);
    add_r1(l.s2(), p.k2);
    add_r1(l.c(), p.k4);
    let mut add_r2 = |row: usize, coef: f64| {
        jx[row * n + l.x2()] += coef * r2_x2;
        jx[row * n + l.s2()] += coef * r2_s2;
    };
    add_r2(l.x2(), 1.0);
    add_r2(l.s2(), -p.k3);
    add_r2(l.c(), p.k5);
    if x[l.c()] > p.kh_pc {
        jx[l.c() * n + l.c()] -= p.kla;
    }
}

/// Jacobian of the outputs with respect to the state: 2 x n row-major.
pub fn output_jacobian_with(x: &[f64], layout: StateLayout, p: &KineticParams, jy: &mut [f64]) {
    let n = layout.n();
    jy.iter_mut().for_each(|v| *v = 0.0);
    let s2 = x[layout.s2()];
    let x2 = x[layout.x2()];
    let m2 = mu2(s2, p);
    let qm = p.k6 * m2 * x2;
    let dqm_ds2 = p.k6 * dmu2(s2, p) * x2;
    let dqm_dx2 = p.k6 * m2;
    jy[layout.s2()] = dqm_ds2;
    jy[layout.x2()] = dqm_dx2;
    if qm >= QM_EPS {
        let qc = co2_transfer(x[layout.c()], p);
        let dqc_dc = if x[layout.c()] > p.kh_pc { p.kla } else { 0.0 };
        jy[n + layout.c()] = dqc_dc / qm;
        jy[n + layout.s2()] = -qc * dqm_ds2 / (qm * qm);
        jy[n + layout.x2()] = -qc * dqm_dx2 / (qm * qm);
    }
}

/// Continuous-time process model as seen by the integrator and the NLP.
pub trait ProcessModel: Sync {
    fn n_states(&self) -> usize;
    fn n_flows(&self) -> usize;
    fn rhs(&self, t: f64, x: &[f64], flows: &[f64], dx: &mut [f64]);
    fn jacobian(&self, t: f64, x: &[f64], flows: &[f64], jx: &mut [f64], ju: &mut [f64]);
    fn outputs(&self, t: f64, x: &[f64]) -> OutputVector;
    fn output_jacobian(&self, t: f64, x: &[f64], jy: &mut [f64]);
}

impl ProcessModel for Digester {
    fn n_states(&self) -> usize {
        self.config.n_states()
    }
    fn n_flows(&self) -> usize {
        self.config.n_feedstocks()
    }
    fn rhs(&self, _t: f64, x: &[f64], flows: &[f64], dx: &mut [f64]) {
        rhs_with(x, flows, &self.config, &self.params, dx)
    }
    fn jacobian(&self, _t: f64, x: &[f64], flows: &[f64], jx: &mut [f64], ju: &mut [f64]) {
        jacobian_with(x, flows, &self.config, &self.params, jx, ju)
    }
    fn outputs(&self, _t: f64, x: &[f64]) -> OutputVector {
        outputs_with(x, self.layout(), &self.params)
    }
    fn output_jacobian(&self, _t: f64, x: &[f64], jy: &mut [f64]) {
        output_jacobian_with(x, self.layout(), &self.params, jy)
    }
}

/// Convenience wrapper returning the rhs as a fresh vector.
pub fn rhs(x: &StateVector, flows: &[f64], cfg: &ReactorConfig, p: &KineticParams) -> StateVector {
    let mut dx = vec![0.0; x.0.len()];
    rhs_with(&x.0, flows, cfg, p, &mut dx);
    StateVector(dx)
}

pub fn outputs(x: &StateVector, cfg: &ReactorConfig, p: &KineticParams) -> OutputVector {
    outputs_with(&x.0, cfg.layout(), p)
}
