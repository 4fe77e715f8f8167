//! Non-negative least squares, `min ||A x - b||^2` subject to `x >= 0`, by
//! the Lawson–Hanson active-set method. Unconstrained subproblems are
//! solved through the SVD pseudo-inverse so rank-deficient columns receive
//! the minimal-norm component.

use nalgebra::{DMatrix, DVector};

use crate::error::{Result, SvirError};

#[derive(Debug, Clone, PartialEq)]
pub struct NnlsSolution {
    pub x: DVector<f64>,
    /// `A^T (b - A x)`; non-positive on the active set and zero on the
    /// passive set at an exact optimum.
    pub gradient: DVector<f64>,
    pub iterations: usize,
}

/// Largest violation of the KKT conditions, scaled by `||A||_F ||b||` (or 1
/// when that vanishes).
pub fn kkt_violation(a: &DMatrix<f64>, b: &DVector<f64>, x: &DVector<f64>) -> f64 {
    let w = a.transpose() * (b - a * x);
    let scale = (a.norm() * b.norm()).max(f64::MIN_POSITIVE);
    let mut worst = 0.0f64;
    for j in 0..x.len() {
        let v = if x[j] > 0.0 { w[j].abs() } else { w[j].max(0.0) };
        worst = worst.max(v);
        worst = worst.max((-x[j]).max(0.0));
    }
    worst / scale.max(1.0)
}

fn pinv_solve(a: &DMatrix<f64>, b: &DVector<f64>) -> Result<DVector<f64>> {
    let svd = a.clone().svd(true, true);
    let smax = svd.singular_values.max();
    let eps = smax * 1e-12 * a.nrows().max(a.ncols()) as f64;
    svd.solve(b, eps.max(f64::MIN_POSITIVE))
        .map_err(|e| SvirError::Numerical(format!("least-squares subproblem: {e}")))
}

pub fn nnls(a: &DMatrix<f64>, b: &DVector<f64>) -> Result<NnlsSolution> {
    let (m, n) = a.shape();
    if b.len() != m {
        return Err(SvirError::invalid(format!(
            "right-hand side has {} rows, matrix {m}",
            b.len()
        )));
    }
    if a.iter().chain(b.iter()).any(|v| !v.is_finite()) {
        return Err(SvirError::invalid("non-finite entry in least-squares system"));
    }
    let tol = 1e-13 * (a.norm() * b.norm()).max(f64::MIN_POSITIVE);
    let mut x = DVector::zeros(n);
    let mut passive = vec![false; n];
    let mut w = a.transpose() * (b - a * &x);
    let max_outer = 3 * n + 10;
    let mut iterations = 0;

    while iterations < max_outer {
        let candidate = (0..n)
            .filter(|&j| !passive[j] && w[j] > tol)
            .max_by(|&i, &j| w[i].total_cmp(&w[j]));
        let Some(j) = candidate else { break };
        iterations += 1;
        passive[j] = true;

        loop {
            let cols: Vec<usize> = (0..n).filter(|&k| passive[k]).collect();
            let sub = a.select_columns(&cols);
            let zp = pinv_solve(&sub, b)?;
            let mut z = DVector::zeros(n);
            for (k, &c) in cols.iter().enumerate() {
                z[c] = zp[k];
            }
            if cols.iter().all(|&c| z[c] > 0.0) {
                x = z;
                break;
            }
            let mut step = f64::INFINITY;
            for &c in &cols {
                if z[c] <= 0.0 {
                    step = step.min(x[c] / (x[c] - z[c]));
                }
            }
            x = &x + (&z - &x) * step;
            let mut dropped = false;
            for &c in &cols {
                if x[c] <= 0.0 {
                    x[c] = 0.0;
                    passive[c] = false;
                    dropped = true;
                }
            }
            if !dropped || !passive.iter().any(|&p| p) {
                break;
            }
        }
        w = a.transpose() * (b - a * &x);
    }
    Ok(NnlsSolution {
        x,
        gradient: w,
        iterations,
    })
}

/// Right singular vectors whose singular value is below `rel_tol` times the
/// largest one.
pub fn null_directions(a: &DMatrix<f64>, rel_tol: f64) -> Vec<DVector<f64>> {
    let n = a.ncols();
    let svd = a.clone().svd(false, true);
    let Some(vt) = svd.v_t else { return Vec::new() };
    let smax = svd.singular_values.max();
    let mut out = Vec::new();
    for k in 0..n {
        let s = if k < svd.singular_values.len() {
            svd.singular_values[k]
        } else {
            0.0
        };
        if s <= rel_tol * smax {
            out.push(vt.row(k).transpose());
        }
    }
    out
}
