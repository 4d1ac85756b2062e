//! Jacobi-preconditioned conjugate gradients.

use super::sparse::SparseMatrix;
use crate::error::{Error, Result};

pub const DEFAULT_TOLERANCE: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct SolveStats {
    pub iterations: usize,
    pub residual: f64,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Inverse of the diagonal, with zero entries mapped to 1.
pub fn jacobi(a: &SparseMatrix) -> Vec<f64> {
    a.diagonal()
        .into_iter()
        .map(|d| if d != 0.0 { 1.0 / d } else { 1.0 })
        .collect()
}

/// Solves `A x = b` to relative residual `tol`, starting from the contents of `x`.
/// Gives up after `max_iter` iterations (default `10 · dim`).
pub fn pcg(
    a: &SparseMatrix,
    inv_diag: &[f64],
    b: &[f64],
    x: &mut [f64],
    tol: f64,
    max_iter: Option<usize>,
) -> Result<SolveStats> {
    let n = a.dim();
    if b.len() != n {
        return Err(Error::DimensionMismatch { expected: n, actual: b.len() });
    }
    if x.len() != n {
        return Err(Error::DimensionMismatch { expected: n, actual: x.len() });
    }
    if !(tol > 0.0) {
        return Err(Error::invalid("CG tolerance must be positive"));
    }
    let max_iter = max_iter.unwrap_or(10 * n.max(1));

    let b_norm = dot(b, b).sqrt();
    if !b_norm.is_finite() {
        return Err(Error::NonFinite("right-hand side".into()));
    }
    if b_norm == 0.0 {
        x.iter_mut().for_each(|v| *v = 0.0);
        return Ok(SolveStats::default());
    }

    let mut r = a.mul_vec(x);
    for (ri, bi) in r.iter_mut().zip(b) {
        *ri = bi - *ri;
    }
    let mut res = dot(&r, &r).sqrt() / b_norm;
    if res <= tol {
        return Ok(SolveStats { iterations: 0, residual: res });
    }
    let mut z: Vec<f64> = r.iter().zip(inv_diag).map(|(ri, d)| ri * d).collect();
    let mut p = z.clone();
    let mut rz = dot(&r, &z);
    let mut ap = vec![0.0; n];

    for it in 1..=max_iter {
        a.mul_vec_into(&p, &mut ap);
        let pap = dot(&p, &ap);
        if !(pap > 0.0) {
            if !pap.is_finite() {
                return Err(Error::NonFinite("CG search direction".into()));
            }
            return Err(Error::SolverNotConverged { iterations: it, residual: res });
        }
        let alpha = rz / pap;
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        res = dot(&r, &r).sqrt() / b_norm;
        if res <= tol {
            return Ok(SolveStats { iterations: it, residual: res });
        }
        for i in 0..n {
            z[i] = r[i] * inv_diag[i];
        }
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
    }
    Err(Error::SolverNotConverged { iterations: max_iter, residual: res })
}

/// Solves `A x = b` from a zero initial guess.
pub fn solve_spd(a: &SparseMatrix, b: &[f64], tol: f64) -> Result<Vec<f64>> {
    let mut x = vec![0.0; a.dim()];
    pcg(a, &jacobi(a), b, &mut x, tol, None)?;
    Ok(x)
}
