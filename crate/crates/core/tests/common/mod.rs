#![allow(dead_code)]

use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use tube_nmpc::integrator::{propagate, FeedSchedule, Workspace};
use tube_nmpc::model::{Digester, ModelParameters, OutputVector, ProcessModel};
use tube_nmpc::nlp::{
    ClosureNlp, CostSpec, InitialStateDof, NlpProblem, OcpSpec, SlackConfig, TubeTarget,
};

pub const DIET: [f64; 3] = [0.0951, 0.2465, 0.0304];

pub fn scenario(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../scenarios").join(name)
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn steady_state(d: &Digester, flows: &[f64]) -> Vec<f64> {
    let n = d.layout().n();
    let mut ws = Workspace::new(n, flows.len(), 0);
    let x0 = vec![2.0, 8.0, 30.0, 3.0, 2.0, 0.2, 4.0, 61.0, 140.0];
    propagate(d, &x0, &vec![flows.to_vec(); 8000], 0.0, 0.1, &mut ws).unwrap()
}

pub struct OcpOptions {
    pub hp: usize,
    pub hc: usize,
    pub slack: bool,
    pub tube: bool,
    pub online: bool,
}

impl OcpOptions {
    pub fn tracking(hp: usize, hc: usize) -> Self {
        Self {
            hp,
            hc,
            slack: false,
            tube: false,
            online: false,
        }
    }
}

/// Tracking (or tube-ancillary) OCP around the first-phase steady state,
/// with a perturbed initial state and reference.
pub fn ocp(o: &OcpOptions, rng: &mut ChaCha8Rng) -> OcpSpec {
    let d = ModelParameters::default_set().digester();
    let xss = steady_state(&d, &DIET);
    let yss = d.outputs(0.0, &xss);
    let l = d.layout();
    let x0: Vec<f64> = xss.iter().map(|v| v * rng.random_range(0.8..1.2)).collect();
    let reference: Vec<OutputVector> = (0..o.hp)
        .map(|_| OutputVector {
            qm: yss.qm * rng.random_range(0.9..1.1),
            ratio: yss.ratio * rng.random_range(0.95..1.05),
        })
        .collect();
    let mut dist = FeedSchedule::constant(&DIET, 0.0, 100.0);
    dist.entries[0].flows[0] = 0.0;
    let mut cost = CostSpec::tracking([1.0, 1.0], [yss.qm, yss.ratio]);
    let mut lb = vec![0.0; l.n()];
    let mut ub = vec![f64::INFINITY; l.n()];
    ub[l.s2()] = 20.0;
    lb[l.x2()] = 1.0;
    if o.tube {
        cost.w_stage = 0.0;
        cost.w_terminal = 1.0;
        cost.w_x = 9.0;
        cost.w_u = 1.0;
        let z = if o.online {
            Vec::new()
        } else {
            (0..=o.hp).map(|_| xss.clone()).collect()
        };
        cost.tube = Some(TubeTarget {
            z,
            nu: (0..o.hp).map(|_| DIET[0] * rng.random_range(0.8..1.2)).collect(),
        });
    }
    OcpSpec {
        model: d,
        horizon: o.hp,
        control_horizon: o.hc,
        interval: 0.25,
        substeps: 12,
        t0: 0.0,
        x0,
        control_index: 0,
        known_disturbance: dist,
        reference,
        cost,
        state_lb: lb.clone(),
        state_ub: ub.clone(),
        input_lb: 0.0,
        input_ub: 0.3,
        du_lb: -0.03,
        du_ub: 0.03,
        previous_input: Some(DIET[0]),
        slack: o.slack.then(|| SlackConfig {
            weight: 1e4,
            states: vec![true; l.n()],
        }),
        initial_state_dof: (o.tube && o.online).then(|| InitialStateDof {
            lb,
            ub,
            guess: xss.clone(),
        }),
        state_scale: xss.iter().map(|v| v.abs().max(0.1)).collect(),
        input_scale: 0.1,
        state_guess: xss,
    }
}

/// Largest relative mismatch between analytic and central-difference
/// derivatives of the objective and equality constraints at `v`.
pub fn fd_mismatch(p: &NlpProblem, v: &[f64]) -> f64 {
    let n = p.n_vars();
    let m = p.n_eq();
    let mut g = vec![0.0; n];
    let mut j = vec![0.0; m * n];
    let mut h = vec![0.0; n * n];
    p.functions.derivatives(v, &vec![0.0; m], &mut g, &mut j, &mut h).unwrap();
    let mut worst: f64 = 0.0;
    for k in 0..n {
        let e = 1e-6 * v[k].abs().max(1.0);
        let mut vp = v.to_vec();
        let mut vm = v.to_vec();
        vp[k] += e;
        vm[k] -= e;
        let (fp, cp) = p.evaluate(&vp).unwrap();
        let (fm, cm) = p.evaluate(&vm).unwrap();
        let fd = (fp - fm) / (2.0 * e);
        worst = worst.max((fd - g[k]).abs() / g[k].abs().max(1.0));
        for i in 0..m {
            let fd = (cp[i] - cm[i]) / (2.0 * e);
            let an = j[i * n + k];
            worst = worst.max((fd - an).abs() / an.abs().max(1.0));
        }
    }
    worst
}

/// `min (v - 3)^2` with box `[lb, ub]`.
pub fn quad_problem(lb: f64, ub: f64) -> NlpProblem {
    ClosureNlp::new(
        1,
        Box::new(|v| (v[0] - 3.0).powi(2)),
        Box::new(|v, g| g[0] = 2.0 * (v[0] - 3.0)),
        Box::new(|_, _, h| h[0] = 2.0),
    )
    .into_problem(vec![lb], vec![ub], vec![0.0])
}

/// `min v0^2 + v1^2` s.t. `v0 + v1 = 1`.
pub fn circle_problem() -> NlpProblem {
    ClosureNlp::new(
        2,
        Box::new(|v| v[0] * v[0] + v[1] * v[1]),
        Box::new(|v, g| {
            g[0] = 2.0 * v[0];
            g[1] = 2.0 * v[1];
        }),
        Box::new(|_, _, h| h.copy_from_slice(&[2.0, 0.0, 0.0, 2.0])),
    )
    .with_equalities(
        1,
        Box::new(|v, c| c[0] = v[0] + v[1] - 1.0),
        Box::new(|_, j| j.copy_from_slice(&[1.0, 1.0])),
    )
    .into_problem(vec![f64::NEG_INFINITY; 2], vec![f64::INFINITY; 2], vec![3.0, -1.0])
}

/// Scenario `name` shortened to `days`, split over two diet phases.
pub fn short_context(name: &str, days: f64) -> tube_nmpc::harness::ScenarioContext {
    let path = scenario(name);
    let mut sc = tube_nmpc::harness::Scenario::from_file(&path).unwrap();
    sc.diet.transition = 1.0;
    let n = sc.diet.phases.len() as f64;
    for p in sc.diet.phases.iter_mut() {
        p.duration = days / n;
    }
    tube_nmpc::harness::ScenarioContext::new(sc, path.parent()).unwrap()
}
