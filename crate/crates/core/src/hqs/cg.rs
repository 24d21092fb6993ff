//! Krylov solvers for symmetric positive definite operators on flat `f64`
//! vectors.
//!
//! The default iteration is the conjugate-residual form of conjugate
//! gradients: same Krylov space and one operator application per step, but
//! it minimises the residual norm, so the recorded residual history never
//! increases. The textbook Hestenes-Stiefel recurrence is kept as an
//! alternative.

use crate::error::{Error, Result};
use crate::image::{dot, norm};

pub trait LinearOperator {
    fn apply(&self, x: &[f64]) -> Result<Vec<f64>>;
}

impl<F> LinearOperator for F
where
    F: Fn(&[f64]) -> Result<Vec<f64>>,
{
    fn apply(&self, x: &[f64]) -> Result<Vec<f64>> {
        self(x)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum KrylovMethod {
    #[default]
    ConjugateResidual,
    ConjugateGradient,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CgOptions {
    /// Relative residual `‖A x − b‖ / ‖b‖` at which iteration stops.
    pub tol: f64,
    pub max_iter: usize,
    pub method: KrylovMethod,
}

impl Default for CgOptions {
    fn default() -> Self {
        CgOptions {
            tol: 1e-5,
            max_iter: 200,
            method: KrylovMethod::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CgOutcome {
    pub x: Vec<f64>,
    pub iterations: usize,
    /// Final relative residual.
    pub residual: f64,
    /// Relative residual before the first step and after every step.
    pub history: Vec<f64>,
    pub converged: bool,
}

/// Solves `A x = b` starting from `x₀ = b`.
pub fn cg_solve(op: &impl LinearOperator, rhs: &[f64], tol: f64, max_iter: usize) -> Result<CgOutcome> {
    cg_solve_with(
        op,
        rhs,
        None,
        &CgOptions {
            tol,
            max_iter,
            ..CgOptions::default()
        },
    )
}

/// Solves `A x = b` from an explicit start (`b` when `x0` is `None`).
/// When the iteration cap is hit the best iterate seen is returned.
pub fn cg_solve_with(
    op: &impl LinearOperator,
    rhs: &[f64],
    x0: Option<&[f64]>,
    opts: &CgOptions,
) -> Result<CgOutcome> {
    if !(opts.tol.is_finite() && opts.tol > 0.0) {
        return Err(Error::Parameter(format!("cg tolerance must be > 0, got {}", opts.tol)));
    }
    if opts.max_iter == 0 {
        return Err(Error::Parameter("cg max_iter must be >= 1".into()));
    }
    if let Some(x0) = x0 {
        if x0.len() != rhs.len() {
            return Err(Error::Shape(format!(
                "initial guess has {} entries, rhs {}",
                x0.len(),
                rhs.len()
            )));
        }
    }
    if rhs.iter().any(|v| !v.is_finite()) {
        return Err(numerical("non-finite right-hand side", 0, Vec::new()));
    }
    let b_norm = norm(rhs);
    if b_norm == 0.0 {
        // SPD: the unique solution is zero
        return Ok(CgOutcome {
            x: vec![0.0; rhs.len()],
            iterations: 0,
            residual: 0.0,
            history: vec![0.0],
            converged: true,
        });
    }

    let mut x = x0.unwrap_or(rhs).to_vec();
    let ax = checked_apply(op, &x, rhs.len(), 0, &[])?;
    let r: Vec<f64> = rhs.iter().zip(&ax).map(|(b, a)| b - a).collect();
    match opts.method {
        KrylovMethod::ConjugateResidual => conjugate_residual(op, &mut x, r, b_norm, opts),
        KrylovMethod::ConjugateGradient => conjugate_gradient(op, &mut x, r, b_norm, opts),
    }
}

fn conjugate_residual(
    op: &impl LinearOperator,
    x: &mut Vec<f64>,
    mut r: Vec<f64>,
    b_norm: f64,
    opts: &CgOptions,
) -> Result<CgOutcome> {
    let n = r.len();
    let mut history = vec![norm(&r) / b_norm];
    if history[0] <= opts.tol {
        return Ok(finish(std::mem::take(x), 0, history, opts.tol));
    }
    let mut ar = checked_apply(op, &r, n, 0, &history)?;
    let mut p = r.clone();
    let mut ap = ar.clone();
    let mut r_ar = dot(&r, &ar);

    for it in 1..=opts.max_iter {
        let ap_ap = dot(&ap, &ap);
        let alpha = r_ar / ap_ap;
        if !alpha.is_finite() {
            return Err(numerical("step length is not finite", it - 1, history));
        }
        axpy(alpha, &p, x);
        axpy(-alpha, &ap, &mut r);
        let rel = norm(&r) / b_norm;
        if !rel.is_finite() {
            return Err(numerical("residual is not finite", it, history));
        }
        history.push(rel);
        if rel <= opts.tol || it == opts.max_iter {
            return Ok(finish(std::mem::take(x), it, history, opts.tol));
        }
        ar = checked_apply(op, &r, n, it, &history)?;
        let next = dot(&r, &ar);
        let beta = next / r_ar;
        r_ar = next;
        for i in 0..n {
            p[i] = r[i] + beta * p[i];
            ap[i] = ar[i] + beta * ap[i];
        }
    }
    unreachable!("loop returns on the last iteration")
}

fn conjugate_gradient(
    op: &impl LinearOperator,
    x: &mut Vec<f64>,
    mut r: Vec<f64>,
    b_norm: f64,
    opts: &CgOptions,
) -> Result<CgOutcome> {
    let n = r.len();
    let mut rr = dot(&r, &r);
    let mut history = vec![rr.sqrt() / b_norm];
    if history[0] <= opts.tol {
        return Ok(finish(std::mem::take(x), 0, history, opts.tol));
    }
    let mut best = (history[0], x.clone());
    let mut p = r.clone();
    for it in 1..=opts.max_iter {
        let ap = checked_apply(op, &p, n, it - 1, &history)?;
        let alpha = rr / dot(&p, &ap);
        if !alpha.is_finite() {
            return Err(numerical("step length is not finite", it - 1, history));
        }
        axpy(alpha, &p, x);
        axpy(-alpha, &ap, &mut r);
        let next = dot(&r, &r);
        let rel = next.sqrt() / b_norm;
        if !rel.is_finite() {
            return Err(numerical("residual is not finite", it, history));
        }
        history.push(rel);
        if rel < best.0 {
            best = (rel, x.clone());
        }
        if rel <= opts.tol {
            return Ok(finish(std::mem::take(x), it, history, opts.tol));
        }
        let beta = next / rr;
        rr = next;
        for i in 0..n {
            p[i] = r[i] + beta * p[i];
        }
    }
    let (residual, x) = best;
    Ok(CgOutcome {
        x,
        iterations: opts.max_iter,
        residual,
        history,
        converged: false,
    })
}

fn finish(x: Vec<f64>, iterations: usize, history: Vec<f64>, tol: f64) -> CgOutcome {
    let residual = *history.last().unwrap();
    CgOutcome {
        x,
        iterations,
        residual,
        history,
        converged: residual <= tol,
    }
}

fn checked_apply(
    op: &impl LinearOperator,
    x: &[f64],
    n: usize,
    iterations: usize,
    history: &[f64],
) -> Result<Vec<f64>> {
    let out = op.apply(x)?;
    if out.len() != n {
        return Err(Error::Shape(format!(
            "operator returned {} entries for {n}",
            out.len()
        )));
    }
    if out.iter().any(|v| !v.is_finite()) {
        return Err(numerical("operator produced non-finite values", iterations, history.to_vec()));
    }
    Ok(out)
}

fn numerical(message: &str, iterations: usize, residuals: Vec<f64>) -> Error {
    Error::Numerical {
        message: message.into(),
        iterations,
        residuals,
    }
}

fn axpy(a: f64, x: &[f64], y: &mut [f64]) {
    y.iter_mut().zip(x).for_each(|(yi, xi)| *yi += a * xi);
}
