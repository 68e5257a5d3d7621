//! Implicit diffusion solve `(I - kappa Laplacian) v = rhs` by conjugate
//! gradient. The zero-flux Laplacian is symmetric negative semidefinite, so
//! the shifted operator is symmetric positive definite and CG applies.

use crate::error::{CoreError, Result};
use crate::field::{laplacian_into, Field};
use crate::grid::Grid;

/// Solves `(I - kappa Laplacian) v = rhs` with Neumann boundaries to the given
/// relative residual. `kappa = 0` returns `rhs` unchanged.
pub fn helmholtz_solve(rhs: &Field, kappa: f64, tol: f64, max_iter: usize) -> Result<Field> {
    let mut out = Field::zeros(rhs.grid());
    let mut ws = CgWorkspace::new(rhs.grid().len());
    helmholtz_solve_into(
        rhs.grid(),
        rhs.as_slice(),
        kappa,
        tol,
        max_iter,
        &mut ws,
        out.as_mut_slice(),
    )?;
    Ok(out)
}

/// Scratch buffers reused across conjugate gradient solves.
pub(crate) struct CgWorkspace {
    r: Vec<f64>,
    p: Vec<f64>,
    ap: Vec<f64>,
}

impl CgWorkspace {
    pub(crate) fn new(n: usize) -> Self {
        Self {
            r: vec![0.0; n],
            p: vec![0.0; n],
            ap: vec![0.0; n],
        }
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Applies `v - kappa Laplacian v` into `out`.
fn operator_apply(grid: Grid, kappa: f64, v: &[f64], out: &mut [f64]) {
    laplacian_into(grid, v, out);
    for (o, &vi) in out.iter_mut().zip(v.iter()) {
        *o = vi - kappa * *o;
    }
}

pub(crate) fn helmholtz_solve_into(
    grid: Grid,
    rhs: &[f64],
    kappa: f64,
    tol: f64,
    max_iter: usize,
    ws: &mut CgWorkspace,
    x: &mut [f64],
) -> Result<()> {
    debug_assert!(kappa >= 0.0, "kappa must be nonnegative");
    x.copy_from_slice(rhs);
    if kappa == 0.0 {
        return Ok(());
    }
    let b_norm = dot(rhs, rhs).sqrt();
    if b_norm == 0.0 {
        x.fill(0.0);
        return Ok(());
    }

    // Initial guess x = rhs; for constant fields the residual vanishes
    // immediately, so constants (the Neumann kernel) pass through exactly.
    let r = &mut ws.r;
    let p = &mut ws.p;
    let ap = &mut ws.ap;
    operator_apply(grid, kappa, x, ap);
    for ((ri, &bi), &ai) in r.iter_mut().zip(rhs.iter()).zip(ap.iter()) {
        *ri = bi - ai;
    }
    let mut rs = dot(r, r);
    let threshold = tol * b_norm;
    if rs.sqrt() <= threshold {
        return Ok(());
    }
    p.copy_from_slice(r);

    for _k in 0..max_iter {
        operator_apply(grid, kappa, p, ap);
        let alpha = rs / dot(p, ap);
        for ((xi, &pi), (ri, &ai)) in x
            .iter_mut()
            .zip(p.iter())
            .zip(r.iter_mut().zip(ap.iter()))
        {
            *xi += alpha * pi;
            *ri -= alpha * ai;
        }
        let rs_new = dot(r, r);
        if rs_new.sqrt() <= threshold {
            return Ok(());
        }
        let beta = rs_new / rs;
        for (pi, &ri) in p.iter_mut().zip(r.iter()) {
            *pi = ri + beta * *pi;
        }
        rs = rs_new;
    }
    Err(CoreError::NonConvergence {
        iterations: max_iter,
        residual: rs.sqrt() / b_norm,
    })
}
