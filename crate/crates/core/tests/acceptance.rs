//! One pass/fail line per acceptance criterion. Failures are reported, not
//! panicked on, so every criterion is always evaluated.

mod common;

use std::time::{Duration, Instant};

use rand::Rng;

use common::{circle_problem, fd_mismatch, ocp, quad_problem, rng, OcpOptions};
use tube_nmpc::controllers::ControllerKind;
use tube_nmpc::harness::{
    monte_carlo, run_controller, run_metrics, s2_series, ControllerSpec, MonteCarloResult, Scenario, ScenarioContext,
};
use tube_nmpc::integrator::{simulate_interval, FeedSchedule};
use tube_nmpc::model::{dilution_rate, inlet_mix, mu2, ModelParameters, OutputVector, ProcessModel};
use tube_nmpc::nlp::{solve, transcribe, SolverOptions};
use tube_nmpc::parallel::ExecutionConfig;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn context(name: &str) -> ScenarioContext {
    ScenarioContext::from_file(&common::scenario(name)).unwrap()
}

fn batch(ctx: &ScenarioContext, specs: &[&str]) -> MonteCarloResult {
    let specs: Vec<ControllerSpec> = specs.iter().map(|s| ControllerSpec::parse(s).unwrap()).collect();
    monte_carlo(ctx, &specs, ExecutionConfig::parallel(None), false).unwrap()
}

fn reduction(base: f64, new: f64) -> f64 {
    (base - new) / base
}

fn c1() -> Outcome {
    let t = Instant::now();
    let p = ModelParameters::default_set().kinetic_params();
    let peak = (p.ks2 * p.ki2).sqrt();
    let n = 100_000;
    let step = 4.0 * peak / n as f64;
    let (mut best, mut arg) = (f64::MIN, 0.0);
    for i in 1..=n {
        let s = i as f64 * step;
        let v = mu2(s, &p);
        if v > best {
            best = v;
            arg = s;
        }
    }
    let mut q = p.clone();
    q.ki2 = 1e12;
    let monod_gap = [0.1, 1.0, 10.0, 100.0]
        .iter()
        .map(|s| {
            let m = q.mu_max2 * s / (s + q.ks2);
            (mu2(*s, &q) - m).abs() / m
        })
        .fold(0.0, f64::max);
    let dt = t.elapsed();
    outcome(
        (arg - peak).abs() <= step && monod_gap <= 1e-9 && dt < Duration::from_secs(1),
        format!("argmax {arg:.4} vs {peak:.4} (step {step:.2e}), Monod gap {monod_gap:.1e}, {dt:.2?}"),
    )
}

fn c2() -> Outcome {
    let t = Instant::now();
    let mut d = ModelParameters::default_set().digester();
    d.params = d.params.transport_only();
    let flows = common::DIET;
    let x_in = inlet_mix(&flows, &d.config.feedstocks).unwrap().0;
    let dd = dilution_rate(&flows, d.config.volume);
    let t_end = 10.0 / dd;
    let x0 = vec![0.0; x_in.len()];
    let sched = FeedSchedule::constant(&flows, 0.0, t_end);
    let x = simulate_interval(&d, &x0, &sched, 0.0, t_end, t_end / 4000.0)
        .unwrap()
        .final_state()
        .to_vec();
    let norm = |v: &mut dyn Iterator<Item = f64>| v.map(|a| a * a).sum::<f64>().sqrt();
    let n_in = norm(&mut x_in.iter().copied());
    let gap = norm(&mut x.iter().zip(&x_in).map(|(a, b)| a - b)) / n_in;
    // exact transport solution from the same start
    let decay = (-dd * t_end).exp();
    let exact = norm(&mut x.iter().zip(&x_in).zip(&x0).map(|((a, b), c)| a - (b + (c - b) * decay))) / n_in;
    let dt = t.elapsed();
    outcome(
        gap < 1e-6 && dt < Duration::from_secs(1),
        format!("|x(T)-x_in|/|x_in| = {gap:.2e} from an empty reactor (exact solution gap {exact:.1e}), {dt:.2?}"),
    )
}

fn c3() -> Outcome {
    struct Decay;
    impl ProcessModel for Decay {
        fn n_states(&self) -> usize {
            1
        }
        fn n_flows(&self) -> usize {
            0
        }
        fn rhs(&self, _t: f64, x: &[f64], _u: &[f64], dx: &mut [f64]) {
            dx[0] = -x[0];
        }
        fn jacobian(&self, _t: f64, _x: &[f64], _u: &[f64], jx: &mut [f64], _ju: &mut [f64]) {
            jx[0] = -1.0;
        }
        fn outputs(&self, _t: f64, x: &[f64]) -> OutputVector {
            OutputVector { qm: x[0], ratio: 0.0 }
        }
        fn output_jacobian(&self, _t: f64, _x: &[f64], jy: &mut [f64]) {
            jy[0] = 1.0;
            jy[1] = 0.0;
        }
    }
    let err = |h: f64| {
        let x = simulate_interval(&Decay, &[1.0], &FeedSchedule::new(0), 0.0, 1.0, h).unwrap();
        (x.final_state()[0] - (-1.0f64).exp()).abs()
    };
    let e: Vec<f64> = [0.1, 0.05, 0.025, 0.0125].iter().map(|h| err(*h)).collect();
    let orders: Vec<f64> = e.windows(2).map(|w| (w[0] / w[1]).log2()).collect();
    outcome(
        orders.iter().all(|o| (3.8..=4.2).contains(o)),
        format!("orders {orders:.3?}"),
    )
}

fn c4() -> Outcome {
    let t = Instant::now();
    let o = SolverOptions::default();
    let kkt = [
        solve(&quad_problem(f64::NEG_INFINITY, f64::INFINITY), None, &o),
        solve(&quad_problem(f64::NEG_INFINITY, 1.0), None, &o),
        solve(&circle_problem(), None, &o),
    ]
    .map(|s| if s.converged() { s.kkt_residual } else { f64::INFINITY });
    let mut r = rng(404);
    let mut worst: f64 = 0.0;
    for i in 0..20 {
        let opts = OcpOptions {
            hp: 3 + i % 4,
            hc: 2,
            slack: i % 2 == 0,
            tube: i % 3 != 0,
            online: i % 3 == 2,
        };
        let spec = ocp(&opts, &mut r);
        let (p, tr) = transcribe(&spec).unwrap();
        let u: Vec<f64> = (0..opts.hc).map(|_| r.random_range(0.06..0.13)).collect();
        let z0 = spec.initial_state_dof.as_ref().map(|z| z.guess.clone());
        let mut v = tr.simulated_guess(&u, z0.as_deref());
        for x in v.iter_mut() {
            *x *= r.random_range(0.95..1.05);
        }
        worst = worst.max(fd_mismatch(&p, &v));
    }
    let dt = t.elapsed();
    let kkt_max = kkt.iter().copied().fold(0.0, f64::max);
    outcome(
        kkt_max <= 1e-6 && worst <= 1e-5 && dt < Duration::from_secs(30),
        format!("KKT residuals [{}], worst FD mismatch {worst:.1e} over 20 instances, {dt:.2?}", kkt.map(|k| format!("{:.1e}", k.abs())).join(", ")),
    )
}

fn c5() -> Outcome {
    let mut r = rng(505);
    let mut worst_excess = f64::MIN;
    let mut lines = Vec::new();
    for _ in 0..5 {
        let spec = ocp(&OcpOptions::tracking(2, 1), &mut r);
        let (p, tr) = transcribe(&spec).unwrap();
        let s = solve(&p, None, &SolverOptions::default());
        let nmpc = p.evaluate(&s.v_star).unwrap().0;
        let prev = spec.previous_input.unwrap();
        let lo = spec.input_lb.max(prev + spec.du_lb);
        let hi = spec.input_ub.min(prev + spec.du_ub);
        let mut best = f64::INFINITY;
        for j in 0..50 {
            let u = lo + (hi - lo) * j as f64 / 49.0;
            let v = tr.simulated_guess(&[u], None);
            let feasible = tr.decode(&v).nodes.iter().all(|x| {
                x.iter()
                    .zip(spec.state_lb.iter().zip(&spec.state_ub))
                    .all(|(v, (l, h))| v >= l && v <= h)
            });
            if feasible {
                best = best.min(p.evaluate(&v).unwrap().0);
            }
        }
        // interior-point barrier leaves an offset of the order of the tolerance
        let excess = (nmpc - best) / best.abs().max(1.0);
        worst_excess = worst_excess.max(excess);
        lines.push(format!("{nmpc:.6}/{best:.6}"));
    }
    outcome(
        worst_excess <= 1e-6,
        format!("NMPC/best-of-50 costs [{}], worst relative excess {worst_excess:.1e}", lines.join(", ")),
    )
}

fn c6() -> Outcome {
    let t = Instant::now();
    let path = common::scenario("t0.toml");
    let sc = Scenario::from_file(&path).unwrap().without_uncertainty();
    let ctx = ScenarioContext::new(sc, path.parent()).unwrap();
    let run = run_controller(&ctx, ControllerKind::Classical, &ctx.realization(0)).unwrap();
    let m = run_metrics(&ctx, "classical", &run);
    let s = &ctx.sets;
    let state_viol = run.records.iter().map(|c| s.state_violation(&c.x)).fold(0.0, f64::max);
    let mut prev = ctx.references.u0();
    let mut input_viol: f64 = 0.0;
    for u in run.inputs() {
        let lo = s.u_lb.max(prev + s.du_lb);
        let hi = s.u_ub.min(prev + s.du_ub);
        input_viol = input_viol.max((lo - u).max(u - hi).max(0.0));
        prev = u;
    }
    let dt = t.elapsed();
    outcome(
        run.succeeded()
            && m.rmse_rel_steady[0] < 1.0
            && state_viol <= 1e-9
            && input_viol <= 1e-12
            && dt < Duration::from_secs(120),
        format!(
            "{} steps, steady RMSE(qM) {:.4}%, state violation {state_viol:.1e}, input violation {input_viol:.1e}, {dt:.1?}",
            ctx.n_steps(),
            m.rmse_rel_steady[0]
        ),
    )
}

struct TubeBatch {
    classical: MonteCarloResult,
    tube: MonteCarloResult,
    elapsed: Duration,
}

fn tube_batch() -> TubeBatch {
    let t = Instant::now();
    let classical = batch(&context("t0.toml"), &["classical"]);
    let tube = batch(&context("t1.toml"), &["offline-tube"]);
    TubeBatch {
        classical,
        tube,
        elapsed: t.elapsed(),
    }
}

fn c7(b: &TubeBatch) -> Outcome {
    let c = &b.classical.results[0].report;
    let o = &b.tube.results[0].report;
    let paired = b.classical.realizations == b.tube.realizations;
    let rs = reduction(c.sigma_bar_s2, o.sigma_bar_s2);
    let rm = reduction(c.s2_max, o.s2_max);
    outcome(
        paired && c.n_runs == 10 && rs >= 0.10 && rm >= 0.10 && b.elapsed < Duration::from_secs(1800),
        format!(
            "classical sigma_bar {:.3} S2max {:.2}; offline tube sigma_bar {:.3} S2max {:.2}; reductions {:.1}% / {:.1}%; paired {paired}, {:.0?}",
            c.sigma_bar_s2,
            c.s2_max,
            o.sigma_bar_s2,
            o.s2_max,
            100.0 * rs,
            100.0 * rm,
            b.elapsed
        ),
    )
}

fn c8(b: &TubeBatch) -> Outcome {
    let t1 = &b.tube.results[0].report;
    let t1b = batch(&context("t1b.toml"), &["offline-tube"]);
    let paired = t1b.realizations == b.tube.realizations;
    let r = &t1b.results[0].report;
    outcome(
        paired && r.sigma_bar_s2 < t1.sigma_bar_s2 && r.rmse_rel[0] > t1.rmse_rel[0],
        format!(
            "(90,1,9): sigma_bar {:.3} RMSE {:.2}%; (1,1,0.1): sigma_bar {:.3} RMSE {:.2}%",
            t1.sigma_bar_s2, t1.rmse_rel[0], r.sigma_bar_s2, r.rmse_rel[0]
        ),
    )
}

fn c9() -> Outcome {
    let mut pass = true;
    let mut parts = Vec::new();
    for name in ["t2.toml", "t3.toml"] {
        let ctx = context(name);
        let kind = ctx.scenario.controller.mode.name();
        let res = batch(&ctx, &[kind]);
        let m = &res.results[0].report;
        pass &= m.n_failed == 0 && m.infeasible_events == 0 && m.slack_fraction <= 0.10;
        parts.push(format!(
            "{} {kind}: {} infeasible events, slack in {:.1}% of steps, {} failed runs",
            ctx.scenario.name,
            m.infeasible_events,
            100.0 * m.slack_fraction,
            m.n_failed
        ));
    }
    outcome(pass, parts.join("; "))
}

struct KnockdownBatch {
    ctx: ScenarioContext,
    res: MonteCarloResult,
}

fn knockdown_batch() -> KnockdownBatch {
    let ctx = context("t4.toml");
    let res = batch(&ctx, &["open-loop", "classical", "offline-tube", "online-tube", "override-pi"]);
    KnockdownBatch { ctx, res }
}

fn c10(k: &KnockdownBatch) -> Outcome {
    let ctx = &k.ctx;
    let layout = ctx.nominal.layout();
    // steady value: mean nominal S2 over the first diet phase
    let n_pre = (ctx.scenario.diet.phases[0].duration / ctx.references.interval).round() as usize;
    let pre = ctx.references.x_ref[..n_pre].iter().map(|x| x[layout.s2()]).sum::<f64>() / n_pre as f64;
    let limit = 3.0 * pre;
    let mut pass = true;
    let mut parts = Vec::new();
    for r in &k.res.results {
        let peaks: Vec<f64> = r
            .runs
            .iter()
            .map(|run| s2_series(run, layout).into_iter().fold(0.0, f64::max))
            .collect();
        let lo = peaks.iter().copied().fold(f64::MAX, f64::min);
        let hi = peaks.iter().copied().fold(0.0, f64::max);
        let ok = match r.spec.kind {
            ControllerKind::OpenLoop => r.report.n_failed == 0 && lo > limit,
            k if k.is_nmpc() => r.report.n_failed == 0 && hi < limit,
            _ => true,
        };
        if r.spec.kind == ControllerKind::OpenLoop || r.spec.kind.is_nmpc() {
            pass &= ok;
            parts.push(format!("{} peaks {lo:.2}..{hi:.2}", r.spec.label));
        }
    }
    outcome(pass, format!("limit 3 x {pre:.3} = {limit:.2}; {}", parts.join(", ")))
}

fn c11(k: &KnockdownBatch) -> Outcome {
    let get = |kind| {
        &k.res
            .results
            .iter()
            .find(|r| r.spec.kind == kind)
            .unwrap()
            .report
    };
    let n = get(ControllerKind::Classical);
    let pi = get(ControllerKind::OverridePi);
    outcome(
        n.saturation_fraction < pi.saturation_fraction && n.s2_max <= pi.s2_max,
        format!(
            "classical NMPC saturation {:.3} S2max {:.2}; override PI saturation {:.3} S2max {:.2}",
            n.saturation_fraction, n.s2_max, pi.saturation_fraction, pi.s2_max
        ),
    )
}

fn c12(b: &TubeBatch) -> Outcome {
    let again = tube_batch();
    let same = |a: &MonteCarloResult, b: &MonteCarloResult| {
        a.realizations == b.realizations
            && a.results.iter().zip(&b.results).all(|(x, y)| x.report == y.report && x.runs == y.runs)
    };
    let ok = same(&b.classical, &again.classical) && same(&b.tube, &again.tube);
    outcome(ok, format!("rerun bit-identical: {ok}"))
}

fn report(n: usize, o: Outcome) {
    let tag = if o.pass { "PASS" } else { "FAIL" };
    println!("criterion {n:>2}: {tag}  {}", o.detail);
}

fn main() {
    // Filtering args from `cargo test <name>` skip the suite unless they
    // name it.
    let args: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    if !args.is_empty() && !args.iter().any(|a| "acceptance".contains(a.as_str())) {
        return;
    }
    report(1, c1());
    report(2, c2());
    report(3, c3());
    report(4, c4());
    report(5, c5());
    report(6, c6());
    let tb = tube_batch();
    report(7, c7(&tb));
    report(8, c8(&tb));
    report(9, c9());
    let kb = knockdown_batch();
    report(10, c10(&kb));
    report(11, c11(&kb));
    report(12, c12(&tb));
}
