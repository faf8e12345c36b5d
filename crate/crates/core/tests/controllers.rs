mod common;

use std::sync::Arc;

use tube_nmpc::controllers::{
    ancillary_step, ClassicalNmpc, Controller, ControllerKind, OverridePi, PiGains, PiLoop, StepInput,
    TubeConfig, TubeSolution,
};
use tube_nmpc::harness::{run_controller, RunResult, ScenarioContext};
use tube_nmpc::model::OutputVector;

fn ctx() -> ScenarioContext {
    common::short_context("t0.toml", 3.0)
}

#[test]
fn zero_tube_weights_reduce_to_classical() {
    let c = ctx();
    let x0 = c.references.x0().to_vec();
    let u0 = c.references.u0();
    let mut w = c.weights.clone();
    w.wx = 0.0;
    w.wu = 0.0;
    w.wy_hp = 0.0;
    let classical = ClassicalNmpc::new(c.setup.clone(), c.sets.clone(), w.clone(), false, u0).unwrap();
    let cfg = TubeConfig {
        ancillary_sets: c.sets.clone(),
        nominal_sets: c.sets.clone(),
        weights: w,
        nominal_slack: false,
        ancillary_slack: false,
        stage_weight: 1.0,
    };
    let hp = c.setup.horizon;
    let tube = TubeSolution {
        z_star: vec![x0.clone(); hp + 1],
        nu_star: vec![u0; hp],
        z0_star: None,
    };
    for k in [0, 4] {
        let a = classical.solve_at(k, &x0).unwrap();
        let b = ancillary_step(&c.setup, &cfg, k, &x0, &tube, false, Some(u0), None).unwrap();
        assert!(a.usable && b.usable);
        for (p, q) in a.decoded.controls.iter().zip(&b.decoded.controls) {
            assert!((p - q).abs() < 1e-6, "{p} vs {q}");
        }
    }
}

#[test]
fn zero_ratio_weight_ignores_ratio_reference() {
    let c = ctx();
    let x0 = c.references.x0().to_vec();
    let mut w = c.weights.clone();
    w.wy = [1.0, 0.0];
    let mut shifted = (*c.setup).clone();
    for r in shifted.y_ref.iter_mut() {
        r.ratio *= 3.0;
    }
    let a = ClassicalNmpc::new(c.setup.clone(), c.sets.clone(), w.clone(), false, c.references.u0()).unwrap();
    let b = ClassicalNmpc::new(Arc::new(shifted), c.sets.clone(), w, false, c.references.u0()).unwrap();
    let ua = a.solve_at(2, &x0).unwrap().decoded.controls;
    let ub = b.solve_at(2, &x0).unwrap().decoded.controls;
    assert_eq!(ua, ub);
}

fn check_bounds(c: &ScenarioContext, run: &RunResult) {
    let s = &c.sets;
    let mut prev = c.references.u0();
    for u in run.inputs() {
        assert!(u >= s.u_lb - 1e-12 && u <= s.u_ub + 1e-12, "{u} outside U");
        let du = u - prev;
        assert!(du >= s.du_lb - 1e-12 && du <= s.du_ub + 1e-12, "move {du} outside DU");
        prev = u;
    }
}

#[test]
fn closed_loops_respect_input_and_move_bounds() {
    let c = ctx();
    let real = c.realization(0);
    let mut hashes = Vec::new();
    for kind in [
        ControllerKind::Classical,
        ControllerKind::OfflineTube,
        ControllerKind::OnlineTube,
        ControllerKind::OverridePi,
    ] {
        let run = run_controller(&c, kind, &real).unwrap();
        assert!(run.succeeded(), "{kind} failed");
        assert_eq!(run.records.len(), c.n_steps() + 1);
        check_bounds(&c, &run);
        hashes.push(run.realization_hash.clone());
    }
    assert!(hashes.windows(2).all(|w| w[0] == w[1]));
    assert_eq!(hashes[0], real.hash());
}

#[test]
fn pi_integrator_stays_in_range() {
    let mut l = PiLoop::new(PiGains { kp: 0.01, ti: 1.0 }, 0.1, 0.0, 0.3);
    for _ in 0..1000 {
        l.update(100.0, 0.25);
    }
    assert_eq!(l.integral, 0.3);
    let u = l.update(-1.0, 0.25);
    assert!(u < 0.3);
    let mut p = PiLoop::new(PiGains { kp: 0.5, ti: f64::INFINITY }, 0.2, 0.0, 0.3);
    assert_eq!(p.update(0.1, 0.25), 0.25);
    assert_eq!(p.integral, 0.2);
}

#[test]
fn override_selects_the_lower_loop() {
    let c = ctx();
    let yref = c.references.y_ref[0];
    let qm_ref = vec![yref.qm; 10];
    let u0 = 0.1;
    let mut pi = OverridePi::new(
        PiGains { kp: 1e-3, ti: 5.0 },
        PiGains { kp: 1.0, ti: 1.0 },
        yref.ratio,
        qm_ref,
        c.sets.clone(),
        c.references.interval,
        u0,
    )
    .unwrap();
    let x = c.references.x0();
    // ratio well above its setpoint pulls the safety loop below production
    let y = OutputVector {
        qm: yref.qm,
        ratio: yref.ratio + 1.0,
    };
    let mut last = u0;
    for k in 0..5 {
        let r = pi.step(&StepInput { k, t: 0.0, x, y_meas: y }).unwrap();
        assert!(r.input <= last + 1e-12);
        last = r.input;
    }
    assert!(last < u0);
}
