use nalgebra::DMatrix;

use super::{half_sq_dist_over, ProxResult};
use crate::error::{invalid, Error, Result};

pub(crate) const SVD_MAX_ITER: usize = 10_000;

pub(crate) fn svd(m: DMatrix<f64>) -> Result<nalgebra::SVD<f64, nalgebra::Dyn, nalgebra::Dyn>> {
    m.try_svd(true, true, f64::EPSILON, SVD_MAX_ITER)
        .ok_or_else(|| Error::NumericalFailure {
            message: "SVD did not converge".into(),
            iterations: SVD_MAX_ITER,
        })
}

/// Sum of singular values of a row-major `rows x cols` matrix.
pub fn nuclear_norm(x: &[f64], rows: usize, cols: usize) -> f64 {
    let m = DMatrix::from_row_slice(rows, cols, x);
    match m.try_svd(false, false, f64::EPSILON, SVD_MAX_ITER) {
        Some(s) => s.singular_values.sum(),
        None => f64::NAN,
    }
}

/// Singular value soft-thresholding by `alpha * lambda`.
///
/// The returned point is row-major.
pub fn prox_nuclear(x: &DMatrix<f64>, lambda: f64, alpha: f64) -> Result<ProxResult> {
    if !(lambda > 0.0) || !(alpha > 0.0) {
        return invalid("nuclear prox needs positive lambda and alpha");
    }
    let (rows, cols) = x.shape();
    let threshold = alpha * lambda;
    let mut decomposition = svd(x.clone())?;
    let mut shrunk_norm = 0.0;
    for s in decomposition.singular_values.iter_mut() {
        *s = (*s - threshold).max(0.0);
        shrunk_norm += *s;
    }
    let p = decomposition
        .recompose()
        .map_err(|e| Error::NumericalFailure {
            message: e.to_string(),
            iterations: 0,
        })?;
    let mut point = Vec::with_capacity(rows * cols);
    for i in 0..rows {
        for j in 0..cols {
            point.push(p[(i, j)]);
        }
    }
    let flat_x: Vec<f64> = (0..rows)
        .flat_map(|i| (0..cols).map(move |j| (i, j)))
        .map(|ij| x[ij])
        .collect();
    let objective = alpha * shrunk_norm + half_sq_dist_over(&flat_x, &point, lambda);
    Ok(ProxResult {
        point,
        objective,
        iterations: 0,
        converged: true,
    })
}

pub fn prox_nuclear_slice(
    x: &[f64],
    rows: usize,
    cols: usize,
    lambda: f64,
    alpha: f64,
) -> Result<ProxResult> {
    if x.len() != rows * cols {
        return invalid(format!(
            "expected {} entries for a {rows}x{cols} matrix, got {}",
            rows * cols,
            x.len()
        ));
    }
    prox_nuclear(&DMatrix::from_row_slice(rows, cols, x), lambda, alpha)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn objective(x: &DMatrix<f64>, u: &DMatrix<f64>, lambda: f64, alpha: f64) -> f64 {
        let s = u.clone().singular_values().sum();
        alpha * s + (x - u).norm_squared() / (2.0 * lambda)
    }

    #[test]
    fn diagonal_matrix_thresholds_its_entries() {
        let x = DMatrix::from_row_slice(2, 2, &[3.0, 0.0, 0.0, 1.0]);
        let r = prox_nuclear(&x, 1.0, 2.0).unwrap();
        let expected = [1.0, 0.0, 0.0, 0.0];
        for (a, b) in r.point.iter().zip(expected) {
            assert!((a - b).abs() < 1e-12, "{:?}", r.point);
        }
    }

    #[test]
    fn zero_is_fixed() {
        let r = prox_nuclear(&DMatrix::zeros(3, 3), 0.5, 1.0).unwrap();
        assert!(r.point.iter().all(|v| *v == 0.0));
        assert_eq!(r.objective, 0.0);
    }

    #[test]
    fn rectangular_input_keeps_shape() {
        let x = DMatrix::from_row_slice(2, 3, &[1.0, 2.0, 3.0, -1.0, 0.5, 0.0]);
        let r = prox_nuclear(&x, 0.1, 1.0).unwrap();
        assert_eq!(r.point.len(), 6);
        assert!(r.objective <= x.clone().singular_values().sum() + 1e-12);
    }

    /// Projected-subgradient style oracle: long run of subgradient descent on
    /// the prox objective with diminishing steps, keeping the best iterate.
    fn subgradient_oracle(x: &DMatrix<f64>, lambda: f64, alpha: f64) -> f64 {
        let mut u = x.clone();
        let mut best = objective(x, &u, lambda, alpha);
        for k in 0..200_000 {
            let svd = u.clone().svd(true, true);
            let uu = svd.u.unwrap();
            let vt = svd.v_t.unwrap();
            let mut g = &uu * &vt * alpha;
            g += (&u - x) / lambda;
            let step = lambda / (1.0 + k as f64).sqrt() * 0.5;
            u -= g * step;
            best = best.min(objective(x, &u, lambda, alpha));
        }
        best
    }

    #[test]
    fn random_matrix_satisfies_subgradient_optimality() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let x = DMatrix::from_fn(4, 4, |_, _| rng.random_range(-1.0..1.0));
        let (lambda, alpha) = (0.3, 1.0);
        let r = prox_nuclear(&x, lambda, alpha).unwrap();
        let p = DMatrix::from_row_slice(4, 4, &r.point);
        // (x - p) / (alpha lambda) must be a nuclear-norm subgradient at p:
        // U V^T on the active singular subspace plus a part with spectral norm <= 1
        // acting on its orthogonal complement.
        let resid = (&x - &p) / (alpha * lambda);
        let svd_p = p.clone().svd(true, true);
        let rank = svd_p.singular_values.iter().filter(|s| **s > 1e-10).count();
        let uu = svd_p.u.unwrap().columns(0, rank).into_owned();
        let vv = svd_p.v_t.unwrap().transpose().columns(0, rank).into_owned();
        let active = &uu * vv.transpose();
        let pu = DMatrix::<f64>::identity(4, 4) - &uu * uu.transpose();
        let pv = DMatrix::<f64>::identity(4, 4) - &vv * vv.transpose();
        let aligned = uu.transpose() * &resid * &vv;
        assert!((aligned - DMatrix::<f64>::identity(rank, rank)).amax() < 1e-8);
        let complement = &pu * &resid * &pv;
        assert!((&resid - &complement - &active).amax() < 1e-8);
        let spectral = complement.singular_values().max();
        assert!(spectral <= 1.0 + 1e-8);
        // the subgradient oracle can only get down to the closed-form objective
        let oracle_best = subgradient_oracle(&x, lambda, alpha);
        assert!(r.objective <= oracle_best + 1e-8);
        assert!(oracle_best - r.objective < 1e-4);
    }
}
