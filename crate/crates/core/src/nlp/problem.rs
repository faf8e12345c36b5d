use std::ops::Range;

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EvalError {
    #[error("non-finite value in {0}")]
    NonFinite(&'static str),
}

/// Smooth part of a nonlinear program: cost, equality residual and their
/// derivatives. Dense storage throughout; problems here have a few hundred
/// variables at most.
pub trait NlpFunctions: Send + Sync {
    fn n_vars(&self) -> usize;
    fn n_eq(&self) -> usize;

    /// Cost at `v`; the equality residual is written into `c`.
    fn evaluate(&self, v: &[f64], c: &mut [f64]) -> Result<f64, EvalError>;

    /// Cost gradient, equality Jacobian (`n_eq x n_vars`, row-major) and a
    /// symmetric positive semidefinite approximation of the Lagrangian
    /// Hessian (`n_vars x n_vars`, row-major) for multipliers `lambda`.
    fn derivatives(
        &self,
        v: &[f64],
        lambda: &[f64],
        grad: &mut [f64],
        jac: &mut [f64],
        hess: &mut [f64],
    ) -> Result<(), EvalError>;
}

/// Two-sided linear inequality `lb <= sum coef_j v_j <= ub`.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearRow {
    pub coefs: Vec<(usize, f64)>,
    pub lb: f64,
    pub ub: f64,
}

impl LinearRow {
    pub fn value(&self, v: &[f64]) -> f64 {
        self.coefs.iter().map(|(j, a)| a * v[*j]).sum()
    }
}

/// Named contiguous slice of the decision vector.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VarBlock {
    pub name: &'static str,
    pub range: Range<usize>,
}

/// Constrained program `min f(v)  s.t.  c(v) = 0,  lb <= v <= ub,
/// row_lb <= A v <= row_ub`.
pub struct NlpProblem {
    pub lb: Vec<f64>,
    pub ub: Vec<f64>,
    pub rows: Vec<LinearRow>,
    pub layout: Vec<VarBlock>,
    /// One variable per equality whose Jacobian block is square and
    /// nonsingular (the shooting nodes). Enables the reduced-space step.
    pub dependents: Option<Vec<usize>>,
    /// Default starting point.
    pub initial: Vec<f64>,
    pub functions: Box<dyn NlpFunctions>,
}

impl NlpProblem {
    pub fn n_vars(&self) -> usize {
        self.lb.len()
    }

    pub fn n_eq(&self) -> usize {
        self.functions.n_eq()
    }

    pub fn block(&self, name: &str) -> Option<Range<usize>> {
        self.layout.iter().find(|b| b.name == name).map(|b| b.range.clone())
    }

    pub fn evaluate(&self, v: &[f64]) -> Result<(f64, Vec<f64>), EvalError> {
        let mut c = vec![0.0; self.n_eq()];
        let f = self.functions.evaluate(v, &mut c)?;
        Ok((f, c))
    }
}

type CostFn = Box<dyn Fn(&[f64]) -> f64 + Send + Sync>;
type VecFn = Box<dyn Fn(&[f64], &mut [f64]) + Send + Sync>;
type HessFn = Box<dyn Fn(&[f64], &[f64], &mut [f64]) + Send + Sync>;

/// Small problems defined by closures; handy for hand-checked examples.
pub struct ClosureNlp {
    pub n: usize,
    pub m: usize,
    pub cost: CostFn,
    pub grad: VecFn,
    pub eq: VecFn,
    pub jac: VecFn,
    pub hess: HessFn,
}

impl ClosureNlp {
    /// Unconstrained-by-equalities problem with the given cost pieces.
    pub fn new(n: usize, cost: CostFn, grad: VecFn, hess: HessFn) -> Self {
        Self {
            n,
            m: 0,
            cost,
            grad,
            eq: Box::new(|_, _| {}),
            jac: Box::new(|_, _| {}),
            hess,
        }
    }

    pub fn with_equalities(mut self, m: usize, eq: VecFn, jac: VecFn) -> Self {
        self.m = m;
        self.eq = eq;
        self.jac = jac;
        self
    }

    pub fn into_problem(self, lb: Vec<f64>, ub: Vec<f64>, initial: Vec<f64>) -> NlpProblem {
        let n = self.n;
        NlpProblem {
            lb,
            ub,
            rows: Vec::new(),
            layout: vec![VarBlock {
                name: "v",
                range: 0..n,
            }],
            dependents: None,
            initial,
            functions: Box::new(self),
        }
    }
}

impl NlpFunctions for ClosureNlp {
    fn n_vars(&self) -> usize {
        self.n
    }
    fn n_eq(&self) -> usize {
        self.m
    }
    fn evaluate(&self, v: &[f64], c: &mut [f64]) -> Result<f64, EvalError> {
        (self.eq)(v, c);
        let f = (self.cost)(v);
        if !f.is_finite() {
            return Err(EvalError::NonFinite("cost"));
        }
        if c.iter().any(|x| !x.is_finite()) {
            return Err(EvalError::NonFinite("constraints"));
        }
        Ok(f)
    }
    fn derivatives(
        &self,
        v: &[f64],
        lambda: &[f64],
        grad: &mut [f64],
        jac: &mut [f64],
        hess: &mut [f64],
    ) -> Result<(), EvalError> {
        (self.grad)(v, grad);
        (self.jac)(v, jac);
        (self.hess)(v, lambda, hess);
        Ok(())
    }
}
