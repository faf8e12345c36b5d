//! Primal-dual interior-point method with an l1 merit line search.
//!
//! Linear inequality rows are turned into equalities with one bounded
//! auxiliary variable each, so the inner problem only carries equalities and
//! box bounds. When the problem declares one dependent variable per equality
//! (the shooting nodes), the Newton step is computed in the null space of the
//! equality Jacobian; otherwise a dense KKT factorization is used.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::kkt::Multipliers;
use super::problem::{EvalError, NlpProblem};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolveStatus {
    Converged,
    MaxIter,
    Infeasible,
    NonFinite,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverOptions {
    pub tol: f64,
    pub max_iter: usize,
    pub mu_init: f64,
    /// Relative push of the starting point into the interior of its bounds.
    pub bound_push: f64,
    /// Use the null-space step whenever dependents are declared.
    pub reduced_space: bool,
    pub record_log: bool,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            tol: 1e-6,
            max_iter: 200,
            mu_init: 0.1,
            bound_push: 1e-2,
            reduced_space: true,
            record_log: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IterRecord {
    pub iter: usize,
    pub cost: f64,
    pub kkt_residual: f64,
    pub step_norm: f64,
    pub mu: f64,
    pub alpha: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NlpSolution {
    pub v_star: Vec<f64>,
    pub cost_star: f64,
    pub kkt_residual: f64,
    pub primal_infeasibility: f64,
    pub iterations: usize,
    pub status: SolveStatus,
    pub multipliers: Multipliers,
    pub log: Vec<IterRecord>,
}

impl NlpSolution {
    pub fn converged(&self) -> bool {
        self.status == SolveStatus::Converged
    }
}

const KAPPA_EPS: f64 = 10.0;
const KAPPA_MU: f64 = 0.2;
const THETA_MU: f64 = 1.5;
const KAPPA_SIGMA: f64 = 1e10;
const ARMIJO: f64 = 1e-4;
const ALPHA_MIN: f64 = 1e-12;

/// Problem with rows folded into equalities and fixed variables factored out.
struct Inner<'a> {
    p: &'a NlpProblem,
    n: usize,
    m: usize,
    nr: usize,
    lb: Vec<f64>,
    ub: Vec<f64>,
    /// Indices (into the augmented vector) of non-fixed variables.
    free: Vec<usize>,
    /// Free-position of each equality's dependent variable.
    dep: Option<Vec<usize>>,
}

struct Eval {
    f: f64,
    c: Vec<f64>,
}

impl<'a> Inner<'a> {
    fn new(p: &'a NlpProblem) -> Self {
        let n = p.n_vars();
        let m = p.n_eq();
        let nr = p.rows.len();
        let mut lb = p.lb.clone();
        let mut ub = p.ub.clone();
        for r in &p.rows {
            lb.push(r.lb);
            ub.push(r.ub);
        }
        let free: Vec<usize> = (0..n + nr).filter(|&j| lb[j] < ub[j]).collect();
        let mut pos = vec![usize::MAX; n + nr];
        for (k, &j) in free.iter().enumerate() {
            pos[j] = k;
        }
        let dep = p.dependents.as_ref().and_then(|d| {
            let mut all: Vec<usize> = d.clone();
            all.extend(n..n + nr);
            if all.len() != m + nr || all.iter().any(|&j| pos[j] == usize::MAX) {
                return None;
            }
            Some(all.iter().map(|&j| pos[j]).collect())
        });
        Self {
            p,
            n,
            m,
            nr,
            lb,
            ub,
            free,
            dep,
        }
    }

    fn n_aug(&self) -> usize {
        self.n + self.nr
    }

    fn m_aug(&self) -> usize {
        self.m + self.nr
    }

    fn eval(&self, w: &[f64]) -> Result<Eval, EvalError> {
        let mut c = vec![0.0; self.m_aug()];
        let f = self.p.functions.evaluate(&w[..self.n], &mut c[..self.m])?;
        for (i, r) in self.p.rows.iter().enumerate() {
            c[self.m + i] = r.value(w) - w[self.n + i];
        }
        if !f.is_finite() || c.iter().any(|x| !x.is_finite()) {
            return Err(EvalError::NonFinite("evaluation"));
        }
        Ok(Eval { f, c })
    }

    /// Gradient, Jacobian and Hessian restricted to free variables.
    fn derivs(&self, w: &[f64], lambda: &[f64]) -> Result<(DVector<f64>, DMatrix<f64>, DMatrix<f64>, Vec<f64>), EvalError> {
        let n = self.n;
        let m = self.m;
        let mut g = vec![0.0; n];
        let mut jac = vec![0.0; m * n];
        let mut hess = vec![0.0; n * n];
        self.p
            .functions
            .derivatives(&w[..n], &lambda[..m], &mut g, &mut jac, &mut hess)?;
        if g.iter().chain(&jac).chain(&hess).any(|x| !x.is_finite()) {
            return Err(EvalError::NonFinite("derivatives"));
        }
        let nf = self.free.len();
        let ma = self.m_aug();
        let mut gf = DVector::zeros(nf);
        let mut jf = DMatrix::zeros(ma, nf);
        let mut hf = DMatrix::zeros(nf, nf);
        let mut pos = vec![usize::MAX; self.n_aug()];
        for (k, &j) in self.free.iter().enumerate() {
            pos[j] = k;
            if j < n {
                gf[k] = g[j];
            }
        }
        for (k, &j) in self.free.iter().enumerate() {
            if j < n {
                for i in 0..m {
                    jf[(i, k)] = jac[i * n + j];
                }
                for (k2, &j2) in self.free.iter().enumerate() {
                    if j2 < n {
                        hf[(k, k2)] = hess[j * n + j2];
                    }
                }
            }
        }
        for (i, r) in self.p.rows.iter().enumerate() {
            for (j, a) in &r.coefs {
                if pos[*j] != usize::MAX {
                    jf[(m + i, pos[*j])] += a;
                }
            }
            let k = pos[n + i];
            if k != usize::MAX {
                jf[(m + i, k)] = -1.0;
            }
        }
        // full-length gradient of f plus J' lambda, used for fixed-variable multipliers
        let mut gl = g.clone();
        gl.resize(self.n_aug(), 0.0);
        for i in 0..m {
            if lambda[i] != 0.0 {
                for j in 0..n {
                    gl[j] += lambda[i] * jac[i * n + j];
                }
            }
        }
        for (i, r) in self.p.rows.iter().enumerate() {
            for (j, a) in &r.coefs {
                gl[*j] += a * lambda[m + i];
            }
            gl[n + i] -= lambda[m + i];
        }
        Ok((gf, jf, hf, gl))
    }
}

struct BarrierState {
    sl: Vec<f64>,
    su: Vec<f64>,
}

fn barrier_state(inner: &Inner, w: &[f64]) -> BarrierState {
    let mut sl = Vec::with_capacity(inner.free.len());
    let mut su = Vec::with_capacity(inner.free.len());
    for &j in &inner.free {
        sl.push(if inner.lb[j].is_finite() { w[j] - inner.lb[j] } else { f64::INFINITY });
        su.push(if inner.ub[j].is_finite() { inner.ub[j] - w[j] } else { f64::INFINITY });
    }
    BarrierState { sl, su }
}

fn barrier_value(b: &BarrierState) -> f64 {
    b.sl
        .iter()
        .chain(&b.su)
        .filter(|s| s.is_finite())
        .map(|s| s.ln())
        .sum()
}

fn l1(v: &[f64]) -> f64 {
    v.iter().map(|x| x.abs()).sum()
}

fn linf(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |a, x| a.max(x.abs()))
}

fn push_interior(lb: f64, ub: f64, x: f64, kappa: f64) -> f64 {
    let mut x = x;
    if lb.is_finite() && ub.is_finite() {
        let pl = (kappa * lb.abs().max(1.0)).min(kappa * (ub - lb));
        let pu = (kappa * ub.abs().max(1.0)).min(kappa * (ub - lb));
        x = x.max(lb + pl).min(ub - pu);
    } else if lb.is_finite() {
        x = x.max(lb + kappa * lb.abs().max(1.0));
    } else if ub.is_finite() {
        x = x.min(ub - kappa * ub.abs().max(1.0));
    }
    x
}

struct Step {
    dw: DVector<f64>,
    lambda: DVector<f64>,
    /// Dependent-block factorization reused for second-order corrections.
    jd_lu: Option<nalgebra::LU<f64, nalgebra::Dyn, nalgebra::Dyn>>,
    curvature: f64,
}

fn reduced_step(
    k: &DMatrix<f64>,
    gphi: &DVector<f64>,
    c: &DVector<f64>,
    jf: &DMatrix<f64>,
    dep: &[usize],
    delta: f64,
) -> Option<Step> {
    let nf = k.nrows();
    let ma = dep.len();
    let mut is_dep = vec![false; nf];
    for &d in dep {
        is_dep[d] = true;
    }
    let ind: Vec<usize> = (0..nf).filter(|&j| !is_dep[j]).collect();
    let jd = jf.select_columns(dep);
    let ji = jf.select_columns(&ind);
    let lu = jd.clone().lu();
    if !lu.is_invertible() {
        return None;
    }
    let t = lu.solve(&ji)?;
    let p = lu.solve(c)?;
    let ni = ind.len();
    let mut z = DMatrix::zeros(nf, ni);
    for (col, &j) in ind.iter().enumerate() {
        z[(j, col)] = 1.0;
    }
    for (row, &d) in dep.iter().enumerate() {
        for col in 0..ni {
            z[(d, col)] = -t[(row, col)];
        }
    }
    let mut y = DVector::zeros(nf);
    for (row, &d) in dep.iter().enumerate() {
        y[d] = -p[row];
    }
    let kz = k * &z;
    let mut mred = z.transpose() * &kz;
    let rhs = -(z.transpose() * (gphi + k * &y));
    let mut d = delta;
    let di = loop {
        let mut mm = mred.clone();
        for i in 0..ni {
            mm[(i, i)] += d;
        }
        if let Some(ch) = mm.cholesky() {
            break ch.solve(&rhs);
        }
        d = if d == 0.0 { 1e-8 } else { d * 10.0 };
        if d > 1e20 {
            return None;
        }
    };
    if d > delta {
        for i in 0..ni {
            mred[(i, i)] += d;
        }
    }
    let dw = &y + &z * &di;
    let kdw = k * &dw;
    let curvature = dw.dot(&kdw);
    let r = kdw + gphi;
    let rd = DVector::from_iterator(ma, dep.iter().map(|&j| r[j]));
    let lambda = -jd.transpose().lu().solve(&rd)?;
    Some(Step {
        dw,
        lambda,
        jd_lu: Some(lu),
        curvature,
    })
}

fn full_step(
    k: &DMatrix<f64>,
    gphi: &DVector<f64>,
    c: &DVector<f64>,
    jf: &DMatrix<f64>,
    delta: f64,
) -> Option<Step> {
    let nf = k.nrows();
    let ma = c.len();
    let mut d = delta;
    let mut dc = 0.0;
    for _ in 0..40 {
        let mut kkt = DMatrix::zeros(nf + ma, nf + ma);
        kkt.view_mut((0, 0), (nf, nf)).copy_from(k);
        for i in 0..nf {
            kkt[(i, i)] += d;
        }
        kkt.view_mut((nf, 0), (ma, nf)).copy_from(jf);
        kkt.view_mut((0, nf), (nf, ma)).copy_from(&jf.transpose());
        for i in 0..ma {
            kkt[(nf + i, nf + i)] = -dc;
        }
        let mut rhs = DVector::zeros(nf + ma);
        rhs.rows_mut(0, nf).copy_from(&(-gphi));
        rhs.rows_mut(nf, ma).copy_from(&(-c));
        let lu = kkt.lu();
        if let Some(sol) = lu.solve(&rhs) {
            let dw = sol.rows(0, nf).into_owned();
            let lambda = sol.rows(nf, ma).into_owned();
            let curvature = dw.dot(&(k * &dw)) + d * dw.norm_squared();
            // reject directions of negative curvature on the constraint null space
            if sol.iter().all(|x| x.is_finite()) && curvature >= -1e-12 * dw.norm_squared() {
                return Some(Step {
                    dw,
                    lambda,
                    jd_lu: None,
                    curvature,
                });
            }
        }
        d = if d == 0.0 { 1e-8 } else { d * 10.0 };
        dc = 1e-8;
    }
    None
}

fn fraction_to_boundary(values: &[f64], steps: &[f64], tau: f64) -> f64 {
    let mut alpha: f64 = 1.0;
    for (v, d) in values.iter().zip(steps) {
        if v.is_finite() && *d < 0.0 {
            alpha = alpha.min(-tau * v / d);
        }
    }
    alpha
}

/// Solve `p` from `warm_start` (or the problem's default start).
pub fn solve(p: &NlpProblem, warm_start: Option<&[f64]>, opts: &SolverOptions) -> NlpSolution {
    let inner = Inner::new(p);
    let n = inner.n;
    let na = inner.n_aug();
    let ma = inner.m_aug();
    let nf = inner.free.len();
    let start = warm_start.unwrap_or(&p.initial);
    let mut w: Vec<f64> = start.to_vec();
    w.resize(na, 0.0);
    for (i, r) in p.rows.iter().enumerate() {
        w[n + i] = r.value(&w[..n]);
    }
    for j in 0..na {
        w[j] = if inner.lb[j] >= inner.ub[j] {
            inner.lb[j]
        } else {
            push_interior(inner.lb[j], inner.ub[j], w[j], opts.bound_push)
        };
    }
    let mut mu = opts.mu_init;
    let mu_min = opts.tol / 10.0;
    let mut lambda = vec![0.0; ma];
    let b0 = barrier_state(&inner, &w);
    let mut zl: Vec<f64> = b0.sl.iter().map(|s| if s.is_finite() { mu / s } else { 0.0 }).collect();
    let mut zu: Vec<f64> = b0.su.iter().map(|s| if s.is_finite() { mu / s } else { 0.0 }).collect();
    let mut nu: f64 = 1.0;
    let mut log = Vec::new();
    let mut delta_fail = 0.0;

    let mut ev = match inner.eval(&w) {
        Ok(e) => e,
        Err(_) => return failed(p, &w, SolveStatus::NonFinite, 0, log),
    };
    let mut iter = 0;
    loop {
        let (gf, jf, hf, gl) = match inner.derivs(&w, &lambda) {
            Ok(d) => d,
            Err(_) => return failed(p, &w, SolveStatus::NonFinite, iter, log),
        };
        let b = barrier_state(&inner, &w);
        // optimality errors
        let jt_l = jf.transpose() * DVector::from_column_slice(&lambda);
        let mut stat0: f64 = 0.0;
        for k in 0..nf {
            let s = gf[k] + jt_l[k] - zl[k] + zu[k];
            stat0 = stat0.max(s.abs());
        }
        let primal = linf(&ev.c);
        let comp = |target: f64| {
            let mut e: f64 = 0.0;
            for k in 0..nf {
                if b.sl[k].is_finite() {
                    e = e.max((zl[k] * b.sl[k] - target).abs());
                }
                if b.su[k].is_finite() {
                    e = e.max((zu[k] * b.su[k] - target).abs());
                }
            }
            e
        };
        let e0 = stat0.max(primal).max(comp(0.0));
        if opts.record_log {
            log.push(IterRecord {
                iter,
                cost: ev.f,
                kkt_residual: e0,
                step_norm: 0.0,
                mu,
                alpha: 0.0,
            });
        }
        if e0 <= opts.tol {
            return finish(&inner, p, w, ev.f, &lambda, &zl, &zu, &gl, SolveStatus::Converged, iter, log, opts.tol);
        }
        if iter >= opts.max_iter {
            return finish(&inner, p, w, ev.f, &lambda, &zl, &zu, &gl, SolveStatus::MaxIter, iter, log, opts.tol);
        }
        loop {
            let emu = stat0.max(primal).max(comp(mu));
            if emu > KAPPA_EPS * mu || mu <= mu_min {
                break;
            }
            mu = mu_min.max((KAPPA_MU * mu).min(mu.powf(THETA_MU)));
        }
        let tau = (1.0 - mu).max(0.99);

        // barrier gradient and primal-dual Hessian
        let mut gphi = gf.clone();
        let mut k = hf;
        for i in 0..nf {
            let mut sig = 0.0;
            if b.sl[i].is_finite() {
                gphi[i] -= mu / b.sl[i];
                sig += zl[i] / b.sl[i];
            }
            if b.su[i].is_finite() {
                gphi[i] += mu / b.su[i];
                sig += zu[i] / b.su[i];
            }
            k[(i, i)] += sig;
        }
        let c = DVector::from_column_slice(&ev.c);
        let step = match (&inner.dep, opts.reduced_space) {
            (Some(dep), true) => reduced_step(&k, &gphi, &c, &jf, dep, delta_fail)
                .or_else(|| full_step(&k, &gphi, &c, &jf, delta_fail)),
            _ => full_step(&k, &gphi, &c, &jf, delta_fail),
        };
        let Some(step) = step else {
            return finish(&inner, p, w, ev.f, &lambda, &zl, &zu, &gl, SolveStatus::Infeasible, iter, log, opts.tol);
        };
        let dw = &step.dw;

        // penalty parameter
        let c1 = l1(&ev.c);
        let gd = gphi.dot(dw);
        let lam_inf = step.lambda.amax();
        nu = nu.max(1.1 * lam_inf);
        if c1 > 0.0 {
            let need = (gd + 0.5 * step.curvature.max(0.0)) / (0.9 * c1);
            nu = nu.max(need);
        }
        let merit = |f: f64, bar: f64, cn: f64| f - mu * bar + nu * cn;
        let phi0 = merit(ev.f, barrier_value(&b), c1);
        let dphi = gd - nu * c1;

        // step to the boundary
        let mut sl_vals = Vec::with_capacity(nf);
        let mut sl_dirs = Vec::with_capacity(nf);
        for i in 0..nf {
            sl_vals.push(b.sl[i]);
            sl_dirs.push(dw[i]);
            sl_vals.push(b.su[i]);
            sl_dirs.push(-dw[i]);
        }
        let alpha_max = fraction_to_boundary(&sl_vals, &sl_dirs, tau);
        let interior = |wt: &[f64]| {
            inner.free.iter().enumerate().all(|(i, &j)| {
                let lo_ok = !inner.lb[j].is_finite() || wt[j] - inner.lb[j] >= (1.0 - tau) * b.sl[i];
                let hi_ok = !inner.ub[j].is_finite() || inner.ub[j] - wt[j] >= (1.0 - tau) * b.su[i];
                lo_ok && hi_ok
            })
        };
        let mut alpha = alpha_max;
        let mut accepted: Option<(Vec<f64>, Eval)> = None;
        let mut first = true;
        while alpha >= ALPHA_MIN {
            let mut wt = w.clone();
            for (i, &j) in inner.free.iter().enumerate() {
                wt[j] += alpha * dw[i];
            }
            if let Ok(et) = inner.eval(&wt) {
                let bt = barrier_state(&inner, &wt);
                let phit = merit(et.f, barrier_value(&bt), l1(&et.c));
                if phit.is_finite() && phit <= phi0 + ARMIJO * alpha * dphi {
                    accepted = Some((wt, et));
                    break;
                }
                if first {
                    if let Some(lu) = &step.jd_lu {
                        let dep = inner.dep.as_ref().expect("reduced step has dependents");
                        if let Some(corr) = lu.solve(&DVector::from_column_slice(&et.c)) {
                            let mut ws = wt.clone();
                            for (row, &d) in dep.iter().enumerate() {
                                ws[inner.free[d]] -= corr[row];
                            }
                            if interior(&ws) {
                                if let Ok(es) = inner.eval(&ws) {
                                    let bs = barrier_state(&inner, &ws);
                                    let phis = merit(es.f, barrier_value(&bs), l1(&es.c));
                                    if phis.is_finite() && phis <= phi0 + ARMIJO * alpha * dphi {
                                        accepted = Some((ws, es));
                                        break;
                                    }
                                }
                            }
                        }
                    }
                }
            }
            first = false;
            alpha *= 0.5;
        }
        let Some((wn, en)) = accepted else {
            delta_fail = if delta_fail == 0.0 { 1e-4 } else { delta_fail * 100.0 };
            if delta_fail > 1e8 {
                let status = if primal > opts.tol {
                    SolveStatus::Infeasible
                } else {
                    SolveStatus::MaxIter
                };
                return finish(&inner, p, w, ev.f, &lambda, &zl, &zu, &gl, status, iter, log, opts.tol);
            }
            iter += 1;
            continue;
        };
        delta_fail = 0.0;

        // dual updates
        let mut dzl = vec![0.0; nf];
        let mut dzu = vec![0.0; nf];
        for i in 0..nf {
            if b.sl[i].is_finite() {
                dzl[i] = mu / b.sl[i] - zl[i] - zl[i] / b.sl[i] * dw[i];
            }
            if b.su[i].is_finite() {
                dzu[i] = mu / b.su[i] - zu[i] + zu[i] / b.su[i] * dw[i];
            }
        }
        let mut zv = zl.clone();
        zv.extend_from_slice(&zu);
        let mut zd = dzl.clone();
        zd.extend_from_slice(&dzu);
        let alpha_z = fraction_to_boundary(&zv, &zd, tau);
        for i in 0..ma {
            lambda[i] += alpha * (step.lambda[i] - lambda[i]);
        }
        let bn = barrier_state(&inner, &wn);
        for i in 0..nf {
            if bn.sl[i].is_finite() {
                zl[i] = (zl[i] + alpha_z * dzl[i])
                    .clamp(mu / (KAPPA_SIGMA * bn.sl[i]), KAPPA_SIGMA * mu / bn.sl[i]);
            }
            if bn.su[i].is_finite() {
                zu[i] = (zu[i] + alpha_z * dzu[i])
                    .clamp(mu / (KAPPA_SIGMA * bn.su[i]), KAPPA_SIGMA * mu / bn.su[i]);
            }
        }
        if let Some(last) = log.last_mut() {
            last.step_norm = alpha * dw.amax();
            last.alpha = alpha;
        }
        w = wn;
        ev = en;
        iter += 1;
    }
}

#[allow(clippy::too_many_arguments)]
fn finish(
    inner: &Inner,
    p: &NlpProblem,
    w: Vec<f64>,
    f: f64,
    lambda: &[f64],
    zl: &[f64],
    zu: &[f64],
    gl: &[f64],
    status: SolveStatus,
    iterations: usize,
    log: Vec<IterRecord>,
    tol: f64,
) -> NlpSolution {
    let n = inner.n;
    let na = inner.n_aug();
    let mut zl_full = vec![0.0; na];
    let mut zu_full = vec![0.0; na];
    let mut is_free = vec![false; na];
    for (k, &j) in inner.free.iter().enumerate() {
        zl_full[j] = zl[k];
        zu_full[j] = zu[k];
        is_free[j] = true;
    }
    for j in 0..na {
        if !is_free[j] {
            zl_full[j] = gl[j].max(0.0);
            zu_full[j] = (-gl[j]).max(0.0);
        }
    }
    let multipliers = Multipliers {
        lambda: lambda[..inner.m].to_vec(),
        z_lower: zl_full[..n].to_vec(),
        z_upper: zu_full[..n].to_vec(),
        row_lower: zl_full[n..].to_vec(),
        row_upper: zu_full[n..].to_vec(),
    };
    let v = w[..n].to_vec();
    let parts = super::kkt::kkt_parts(p, &v, &multipliers).unwrap_or(super::kkt::KktParts {
        stationarity: f64::INFINITY,
        ..Default::default()
    });
    let mut status = status;
    let kkt = parts.max();
    if status == SolveStatus::Converged && !(kkt <= tol) {
        status = SolveStatus::MaxIter;
    }
    NlpSolution {
        v_star: v,
        cost_star: f,
        kkt_residual: kkt,
        primal_infeasibility: parts.primal,
        iterations,
        status,
        multipliers,
        log,
    }
}

fn failed(p: &NlpProblem, w: &[f64], status: SolveStatus, iterations: usize, log: Vec<IterRecord>) -> NlpSolution {
    let v = w[..p.n_vars()].to_vec();
    NlpSolution {
        cost_star: f64::NAN,
        kkt_residual: f64::INFINITY,
        primal_infeasibility: f64::INFINITY,
        multipliers: Multipliers::zeros(p),
        v_star: v,
        iterations,
        status,
        log,
    }
}
