//! Anisotropic total variation and its proximal operator.
//!
//! The discrete gradient uses forward differences with a zero difference
//! past the last row and column, which is the same as reflecting the image
//! across its border. Dual fields are stored as `[vertical | horizontal]`,
//! each of length `rows * cols`.

use super::{half_sq_dist_over, ProxResult};
use crate::error::{invalid, Result};

pub const DEFAULT_TV_TOL: f64 = 1e-6;
pub const DEFAULT_TV_MAX_ITER: usize = 500;
const DUAL_STEP: f64 = 1.0 / 8.0;

/// `sum |u(i+1,j) - u(i,j)| + |u(i,j+1) - u(i,j)|`.
pub fn tv_aniso(u: &[f64], rows: usize, cols: usize) -> f64 {
    let mut total = 0.0;
    for i in 0..rows {
        for j in 0..cols {
            let here = u[i * cols + j];
            if i + 1 < rows {
                total += (u[(i + 1) * cols + j] - here).abs();
            }
            if j + 1 < cols {
                total += (u[i * cols + j + 1] - here).abs();
            }
        }
    }
    total
}

fn gradient(u: &[f64], rows: usize, cols: usize, out: &mut [f64]) {
    let n = rows * cols;
    let (gv, gh) = out.split_at_mut(n);
    for i in 0..rows {
        for j in 0..cols {
            let k = i * cols + j;
            gv[k] = if i + 1 < rows { u[k + cols] - u[k] } else { 0.0 };
            gh[k] = if j + 1 < cols { u[k + 1] - u[k] } else { 0.0 };
        }
    }
}

/// Adjoint of [`gradient`], i.e. minus the discrete divergence.
fn gradient_adjoint(q: &[f64], rows: usize, cols: usize, out: &mut [f64]) {
    let n = rows * cols;
    let (qv, qh) = q.split_at(n);
    for i in 0..rows {
        for j in 0..cols {
            let k = i * cols + j;
            let mut acc = 0.0;
            if i + 1 < rows {
                acc -= qv[k];
            }
            if i > 0 {
                acc += qv[k - cols];
            }
            if j + 1 < cols {
                acc -= qh[k];
            }
            if j > 0 {
                acc += qh[k - 1];
            }
            out[k] = acc;
        }
    }
}

/// Dual variable of the TV prox, reusable as a warm start between calls on
/// nearby inputs.
#[derive(Debug, Clone, PartialEq)]
pub struct TvDual {
    pub q: Vec<f64>,
}

impl TvDual {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            q: vec![0.0; 2 * rows * cols],
        }
    }
}

/// Approximate minimiser of `alpha TV(u) + ||x - u||^2 / (2 lambda)`.
///
/// Stops when the largest change of the dual field (which lives in the unit
/// box) drops below `tol`, or after `max_iter` sweeps with `converged = false`.
pub fn prox_tv2d(
    x: &[f64],
    rows: usize,
    cols: usize,
    lambda: f64,
    alpha: f64,
    tol: f64,
    max_iter: usize,
) -> Result<ProxResult> {
    let mut dual = TvDual::zeros(rows, cols);
    prox_tv2d_warm(x, rows, cols, lambda, alpha, tol, max_iter, &mut dual)
}

#[allow(clippy::too_many_arguments)]
pub fn prox_tv2d_warm(
    x: &[f64],
    rows: usize,
    cols: usize,
    lambda: f64,
    alpha: f64,
    tol: f64,
    max_iter: usize,
    dual: &mut TvDual,
) -> Result<ProxResult> {
    let n = rows * cols;
    if x.len() != n {
        return invalid(format!("expected {n} pixels, got {}", x.len()));
    }
    if !(lambda > 0.0) || !(alpha > 0.0) || !(tol > 0.0) {
        return invalid("TV prox needs positive lambda, alpha and tol");
    }
    if dual.q.len() != 2 * n {
        *dual = TvDual::zeros(rows, cols);
    }
    let theta = alpha * lambda;
    let mut u = vec![0.0; n];
    let mut adj = vec![0.0; n];
    let mut grad = vec![0.0; 2 * n];
    let mut iterations = 0;
    let mut converged = false;
    while iterations < max_iter {
        iterations += 1;
        gradient_adjoint(&dual.q, rows, cols, &mut adj);
        for k in 0..n {
            u[k] = x[k] - theta * adj[k];
        }
        gradient(&u, rows, cols, &mut grad);
        let mut change = 0.0f64;
        for (q, g) in dual.q.iter_mut().zip(&grad) {
            let next = (*q + DUAL_STEP * g / theta).clamp(-1.0, 1.0);
            change = change.max((next - *q).abs());
            *q = next;
        }
        if change < tol {
            converged = true;
            break;
        }
    }
    gradient_adjoint(&dual.q, rows, cols, &mut adj);
    for k in 0..n {
        u[k] = x[k] - theta * adj[k];
    }
    let objective = alpha * tv_aniso(&u, rows, cols) + half_sq_dist_over(x, &u, lambda);
    Ok(ProxResult {
        point: u,
        objective,
        iterations,
        converged,
    })
}

/// Duality gap of the TV prox problem in objective units.
///
/// With `p = x - alpha lambda D^T q` and `q` in the unit box this equals
/// `alpha * sum_e (|(Dp)_e| - q_e (Dp)_e)`, which is zero exactly when
/// `x - p` lies in `lambda alpha dTV(p)`.
pub fn tv_duality_gap(p: &[f64], q: &[f64], rows: usize, cols: usize, alpha: f64) -> f64 {
    let n = rows * cols;
    let mut grad = vec![0.0; 2 * n];
    gradient(p, rows, cols, &mut grad);
    alpha
        * grad
            .iter()
            .zip(q)
            .map(|(g, qe)| g.abs() - qe * g)
            .sum::<f64>()
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::{DMatrix, DVector};

    fn edges(rows: usize, cols: usize) -> Vec<(usize, usize)> {
        let mut e = Vec::new();
        for i in 0..rows {
            for j in 0..cols {
                let k = i * cols + j;
                if i + 1 < rows {
                    e.push((k, k + cols));
                }
                if j + 1 < cols {
                    e.push((k, k + 1));
                }
            }
        }
        e
    }

    /// ADMM on `alpha ||z||_1 + ||x-u||^2/(2 lambda)` subject to `z = D u`,
    /// run long enough to be a reference to ~1e-12.
    fn admm_oracle(x: &[f64], rows: usize, cols: usize, lambda: f64, alpha: f64) -> f64 {
        let n = rows * cols;
        let e = edges(rows, cols);
        let mut d = DMatrix::<f64>::zeros(e.len(), n);
        for (r, (a, b)) in e.iter().enumerate() {
            d[(r, *a)] = -1.0;
            d[(r, *b)] = 1.0;
        }
        let rho = 1.0;
        let sys = DMatrix::<f64>::identity(n, n) / lambda + d.transpose() * &d * rho;
        let chol = sys.cholesky().unwrap();
        let xv = DVector::from_column_slice(x);
        let mut z = DVector::<f64>::zeros(e.len());
        let mut w = DVector::<f64>::zeros(e.len());
        let mut u = xv.clone();
        for _ in 0..200_000 {
            let rhs = &xv / lambda + d.transpose() * (&z - &w) * rho;
            u = chol.solve(&rhs);
            let du = &d * &u;
            let t = alpha / rho;
            z = (&du + &w).map(|v| if v.abs() > t { v - t * v.signum() } else { 0.0 });
            w += &du - &z;
        }
        let u: Vec<f64> = u.iter().copied().collect();
        alpha * tv_aniso(&u, rows, cols) + half_sq_dist_over(x, &u, lambda)
    }

    #[test]
    fn adjoint_is_consistent() {
        let (rows, cols) = (3, 4);
        let u: Vec<f64> = (0..12).map(|k| ((k * 7) % 5) as f64 - 1.3).collect();
        let q: Vec<f64> = (0..24).map(|k| ((k * 3) % 7) as f64 * 0.1 - 0.2).collect();
        let mut du = vec![0.0; 24];
        gradient(&u, rows, cols, &mut du);
        let mut dtq = vec![0.0; 12];
        gradient_adjoint(&q, rows, cols, &mut dtq);
        let lhs: f64 = du.iter().zip(&q).map(|(a, b)| a * b).sum();
        let rhs: f64 = u.iter().zip(&dtq).map(|(a, b)| a * b).sum();
        assert!((lhs - rhs).abs() < 1e-12);
    }

    #[test]
    fn constant_image_is_fixed() {
        let x = vec![2.5; 16];
        let r = prox_tv2d(&x, 4, 4, 0.5, 1.0, 1e-8, 100).unwrap();
        assert_eq!(r.point, x);
        assert!(r.converged);
    }

    #[test]
    fn single_pixel_is_identity() {
        let r = prox_tv2d(&[3.0], 1, 1, 1.0, 1.0, 1e-8, 10).unwrap();
        assert_eq!(r.point, vec![3.0]);
    }

    #[test]
    fn step_image_matches_admm_reference() {
        let (rows, cols) = (4, 4);
        let x: Vec<f64> = (0..16).map(|k| if k % 4 < 2 { 0.0 } else { 1.0 }).collect();
        // alpha * lambda = 0.1
        let (lambda, alpha) = (0.1, 1.0);
        let reference = admm_oracle(&x, rows, cols, lambda, alpha);
        let r = prox_tv2d(&x, rows, cols, lambda, alpha, 1e-12, 200_000).unwrap();
        assert!(
            (r.objective - reference).abs() < 1e-6,
            "{} vs {}",
            r.objective,
            reference
        );
    }

    #[test]
    fn hitting_the_cap_is_flagged() {
        let x: Vec<f64> = (0..64).map(|k| ((k * 37) % 11) as f64).collect();
        let r = prox_tv2d(&x, 8, 8, 1.0, 1.0, 1e-14, 3).unwrap();
        assert!(!r.converged);
        assert_eq!(r.iterations, 3);
    }

    #[test]
    fn gap_shrinks_with_tolerance() {
        let x: Vec<f64> = (0..36).map(|k| ((k * 13) % 7) as f64 * 0.3).collect();
        let mut dual = TvDual::zeros(6, 6);
        let r = prox_tv2d_warm(&x, 6, 6, 0.4, 0.5, 1e-10, 100_000, &mut dual).unwrap();
        assert!(r.converged);
        assert!(tv_duality_gap(&r.point, &dual.q, 6, 6, 0.5) < 1e-8);
    }
}
