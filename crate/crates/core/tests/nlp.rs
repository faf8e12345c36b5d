mod common;

use proptest::prelude::*;
use rand::Rng;

use common::{circle_problem, fd_mismatch, ocp, quad_problem, rng, OcpOptions};
use tube_nmpc::nlp::{solve, transcribe, SolveStatus, SolverOptions};

#[test]
fn hand_solved_examples() {
    let o = SolverOptions::default();
    let s = solve(&quad_problem(f64::NEG_INFINITY, f64::INFINITY), None, &o);
    assert!(s.converged() && (s.v_star[0] - 3.0).abs() < 1e-8 && s.kkt_residual <= 1e-6);
    let s = solve(&quad_problem(f64::NEG_INFINITY, 1.0), None, &o);
    assert!(s.converged() && (s.v_star[0] - 1.0).abs() < 1e-6 && s.kkt_residual <= 1e-6);
    let s = solve(&circle_problem(), None, &o);
    assert!(s.converged() && s.kkt_residual <= 1e-6);
    assert!((s.v_star[0] - 0.5).abs() < 1e-8 && (s.v_star[1] - 0.5).abs() < 1e-8);
}

#[test]
fn slack_absorbs_an_infeasible_start() {
    let mut r = rng(5);
    let mut o = OcpOptions::tracking(6, 2);
    o.slack = true;
    let mut spec = ocp(&o, &mut r);
    let l = spec.model.layout();
    spec.x0[l.s2()] = 35.0;
    let (p, t) = transcribe(&spec).unwrap();
    let s = solve(&p, None, &SolverOptions::default());
    assert_eq!(s.status, SolveStatus::Converged);
    let used = t.decode(&s.v_star).slacks.iter().flatten().fold(0.0, |a: f64, b| a.max(*b));
    assert!(used > 1e-3, "{used}");

    // and without slacks the same start cannot satisfy the bound
    spec.slack = None;
    let (p, _) = transcribe(&spec).unwrap();
    let s = solve(&p, None, &SolverOptions::default());
    assert_ne!(s.status, SolveStatus::Converged);
}

#[test]
fn slack_is_zero_when_unneeded() {
    let mut r = rng(9);
    let mut o = OcpOptions::tracking(6, 2);
    o.slack = true;
    let spec = ocp(&o, &mut r);
    let (p, t) = transcribe(&spec).unwrap();
    let s = solve(&p, None, &SolverOptions::default());
    assert_eq!(s.status, SolveStatus::Converged);
    for (k, node) in t.decode(&s.v_star).slacks.iter().enumerate() {
        for (i, v) in node.iter().enumerate() {
            assert!(*v <= 1e-5 * spec.state_scale[i], "slack {k},{i} = {v}");
        }
    }
}

#[test]
fn warm_start_does_not_cost_more_than_cold() {
    let mut r = rng(21);
    for case in 0..4 {
        let mut o = OcpOptions::tracking(10, 2);
        o.slack = case % 2 == 1;
        let spec = ocp(&o, &mut r);
        let (p, _) = transcribe(&spec).unwrap();
        let cold = solve(&p, None, &SolverOptions::default());
        assert!(cold.converged());
        let warm = solve(&p, Some(&cold.v_star), &SolverOptions::default());
        assert!(warm.converged());
        assert!(warm.iterations <= 2 * cold.iterations, "{} vs {}", warm.iterations, cold.iterations);
    }
}

#[test]
fn tube_costs_have_exact_derivatives() {
    let mut r = rng(33);
    for online in [false, true] {
        let o = OcpOptions {
            hp: 4,
            hc: 2,
            slack: true,
            tube: true,
            online,
        };
        let spec = ocp(&o, &mut r);
        let (p, t) = transcribe(&spec).unwrap();
        let z0 = spec.initial_state_dof.as_ref().map(|z| z.guess.clone());
        let mut v = t.simulated_guess(&[0.09, 0.11], z0.as_deref());
        for x in v.iter_mut() {
            *x *= r.random_range(0.95..1.05);
        }
        assert!(fd_mismatch(&p, &v) < 1e-5);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn solutions_respect_input_and_move_bounds(seed in 0u64..10_000) {
        let mut r = rng(seed);
        let spec = ocp(&OcpOptions::tracking(4, 2), &mut r);
        let (p, t) = transcribe(&spec).unwrap();
        let s = solve(&p, None, &SolverOptions::default());
        let u = t.decode(&s.v_star).inputs;
        let mut prev = spec.previous_input.unwrap();
        for (k, v) in u.iter().enumerate() {
            prop_assert!(*v >= spec.input_lb - 1e-9 && *v <= spec.input_ub + 1e-9);
            if k < spec.control_horizon {
                prop_assert!(v - prev >= spec.du_lb - 1e-9 && v - prev <= spec.du_ub + 1e-9);
            }
            prev = *v;
        }
    }
}
