use super::problem::{EvalError, NlpProblem};

/// Lagrange multipliers for `L = f + lambda'c - z_l'(v - lb) - z_u'(ub - v)
/// - w_l'(Av - row_lb) - w_u'(row_ub - Av)`.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Multipliers {
    pub lambda: Vec<f64>,
    pub z_lower: Vec<f64>,
    pub z_upper: Vec<f64>,
    pub row_lower: Vec<f64>,
    pub row_upper: Vec<f64>,
}

impl Multipliers {
    pub fn zeros(p: &NlpProblem) -> Self {
        let n = p.n_vars();
        let r = p.rows.len();
        Self {
            lambda: vec![0.0; p.n_eq()],
            z_lower: vec![0.0; n],
            z_upper: vec![0.0; n],
            row_lower: vec![0.0; r],
            row_upper: vec![0.0; r],
        }
    }
}

/// Individual components of the first-order optimality error.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct KktParts {
    pub stationarity: f64,
    pub primal: f64,
    pub complementarity: f64,
    pub dual_sign: f64,
}

impl KktParts {
    pub fn max(&self) -> f64 {
        self.stationarity
            .max(self.primal)
            .max(self.complementarity)
            .max(self.dual_sign)
    }
}

/// Stationarity gradient `grad f + J' lambda - z_l + z_u - A'(w_l - w_u)`.
pub fn lagrangian_gradient(
    p: &NlpProblem,
    v: &[f64],
    mult: &Multipliers,
) -> Result<Vec<f64>, EvalError> {
    let n = p.n_vars();
    let m = p.n_eq();
    let mut grad = vec![0.0; n];
    let mut jac = vec![0.0; m * n];
    let mut hess = vec![0.0; n * n];
    p.functions
        .derivatives(v, &mult.lambda, &mut grad, &mut jac, &mut hess)?;
    for i in 0..m {
        let l = mult.lambda[i];
        if l != 0.0 {
            for j in 0..n {
                grad[j] += l * jac[i * n + j];
            }
        }
    }
    for j in 0..n {
        grad[j] += mult.z_upper[j] - mult.z_lower[j];
    }
    for (r, row) in p.rows.iter().enumerate() {
        let w = mult.row_lower[r] - mult.row_upper[r];
        for (j, a) in &row.coefs {
            grad[*j] -= a * w;
        }
    }
    Ok(grad)
}

pub fn kkt_parts(p: &NlpProblem, v: &[f64], mult: &Multipliers) -> Result<KktParts, EvalError> {
    let g = lagrangian_gradient(p, v, mult)?;
    let (_, c) = p.evaluate(v)?;
    let mut parts = KktParts {
        stationarity: g.iter().fold(0.0, |a, x| a.max(x.abs())),
        primal: c.iter().fold(0.0, |a, x| a.max(x.abs())),
        ..Default::default()
    };
    for j in 0..p.n_vars() {
        let (lb, ub) = (p.lb[j], p.ub[j]);
        parts.primal = parts.primal.max(lb - v[j]).max(v[j] - ub);
        if lb.is_finite() {
            parts.complementarity = parts.complementarity.max((mult.z_lower[j] * (v[j] - lb)).abs());
        }
        if ub.is_finite() {
            parts.complementarity = parts.complementarity.max((mult.z_upper[j] * (ub - v[j])).abs());
        }
        parts.dual_sign = parts.dual_sign.max(-mult.z_lower[j]).max(-mult.z_upper[j]);
    }
    for (r, row) in p.rows.iter().enumerate() {
        let a = row.value(v);
        parts.primal = parts.primal.max(row.lb - a).max(a - row.ub);
        if row.lb.is_finite() {
            parts.complementarity = parts.complementarity.max((mult.row_lower[r] * (a - row.lb)).abs());
        }
        if row.ub.is_finite() {
            parts.complementarity = parts.complementarity.max((mult.row_upper[r] * (row.ub - a)).abs());
        }
        parts.dual_sign = parts.dual_sign.max(-mult.row_lower[r]).max(-mult.row_upper[r]);
    }
    Ok(parts)
}

/// Max-norm of stationarity, primal feasibility and complementarity.
pub fn kkt_residual(p: &NlpProblem, v: &[f64], mult: &Multipliers) -> f64 {
    match kkt_parts(p, v, mult) {
        Ok(parts) => parts.max(),
        Err(_) => f64::INFINITY,
    }
}
