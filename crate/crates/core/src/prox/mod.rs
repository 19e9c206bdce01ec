//! Proximal operators `argmin_u g(u) + ||x - u||^2 / (2 lambda)` for the
//! non-smooth priors used by the samplers.
//!
//! Closed forms exist for the weighted L1 norm and the nuclear norm. Total
//! variation is solved by projected gradient on its dual, and arbitrary
//! convex functions go through a cutting-plane solver that only needs values
//! and subgradients.

mod l1;
mod nuclear;
mod numeric;
mod tv;

use std::fmt;
use std::sync::Arc;

pub use l1::{l1_subgradient_residual, prox_l1, weighted_l1};
pub use nuclear::{nuclear_norm, prox_nuclear, prox_nuclear_slice};
pub use numeric::{
    prox_numeric, prox_numeric_with_cap, BoxIndicator, ConvexFunction, DEFAULT_NUMERIC_MAX_ITER,
    DEFAULT_NUMERIC_TOL,
};
pub use tv::{
    prox_tv2d, prox_tv2d_warm, tv_aniso, tv_duality_gap, TvDual, DEFAULT_TV_MAX_ITER,
    DEFAULT_TV_TOL,
};

use crate::error::{invalid, Result};

/// Output of a proximal evaluation at `(x, lambda)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ProxResult {
    /// The minimiser `p`.
    pub point: Vec<f64>,
    /// `g(p) + ||x - p||^2 / (2 lambda)`.
    pub objective: f64,
    /// Iterations used; 0 for closed forms.
    pub iterations: usize,
    /// False when an iterative solver stopped at its iteration cap.
    pub converged: bool,
}

/// Which non-smooth function a [`ProxSpec`] refers to.
#[derive(Clone)]
pub enum ProxKind {
    /// `g(u) = sum_i w_i |u_i|`.
    WeightedL1 { weights: Vec<f64> },
    /// `g(U) = alpha ||U||_*` for a row-major `rows x cols` matrix.
    Nuclear { alpha: f64, rows: usize, cols: usize },
    /// `g(u) = alpha TV(u)` with the anisotropic discrete TV of a row-major image.
    Tv2d {
        alpha: f64,
        rows: usize,
        cols: usize,
        tol: f64,
        max_iter: usize,
    },
    /// Any convex function, solved numerically.
    Numeric {
        function: Arc<dyn ConvexFunction>,
        tol: f64,
        max_iter: usize,
    },
}

impl fmt::Debug for ProxKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ProxKind::WeightedL1 { weights } => {
                f.debug_struct("WeightedL1").field("weights", weights).finish()
            }
            ProxKind::Nuclear { alpha, rows, cols } => f
                .debug_struct("Nuclear")
                .field("alpha", alpha)
                .field("rows", rows)
                .field("cols", cols)
                .finish(),
            ProxKind::Tv2d {
                alpha,
                rows,
                cols,
                tol,
                max_iter,
            } => f
                .debug_struct("Tv2d")
                .field("alpha", alpha)
                .field("rows", rows)
                .field("cols", cols)
                .field("tol", tol)
                .field("max_iter", max_iter)
                .finish(),
            ProxKind::Numeric { tol, max_iter, .. } => f
                .debug_struct("Numeric")
                .field("tol", tol)
                .field("max_iter", max_iter)
                .finish_non_exhaustive(),
        }
    }
}

impl ProxKind {
    /// Evaluates the non-smooth function itself.
    pub fn value(&self, x: &[f64]) -> f64 {
        match self {
            ProxKind::WeightedL1 { weights } => weighted_l1(x, weights),
            ProxKind::Nuclear { alpha, rows, cols } => alpha * nuclear_norm(x, *rows, *cols),
            ProxKind::Tv2d {
                alpha, rows, cols, ..
            } => alpha * tv_aniso(x, *rows, *cols),
            ProxKind::Numeric { function, .. } => function.value(x),
        }
    }

    fn validate(&self) -> Result<()> {
        match self {
            ProxKind::WeightedL1 { weights } => {
                if weights.iter().any(|w| !(*w > 0.0) || !w.is_finite()) {
                    return invalid("L1 weights must be strictly positive");
                }
            }
            ProxKind::Nuclear { alpha, .. } => {
                if !(*alpha > 0.0) {
                    return invalid("nuclear-norm scale must be positive");
                }
            }
            ProxKind::Tv2d { alpha, tol, .. } => {
                if !(*alpha > 0.0) || !(*tol > 0.0) {
                    return invalid("TV scale and tolerance must be positive");
                }
            }
            ProxKind::Numeric { tol, .. } => {
                if !(*tol > 0.0) {
                    return invalid("numeric prox tolerance must be positive");
                }
            }
        }
        Ok(())
    }
}

/// A proximal operator with its envelope tightness `lambda`.
#[derive(Debug, Clone)]
pub struct ProxSpec {
    lambda: f64,
    kind: ProxKind,
}

impl ProxSpec {
    pub fn new(lambda: f64, kind: ProxKind) -> Result<Self> {
        if !(lambda > 0.0) || !lambda.is_finite() {
            return invalid(format!("lambda must be positive, got {lambda}"));
        }
        kind.validate()?;
        Ok(Self { lambda, kind })
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn kind(&self) -> &ProxKind {
        &self.kind
    }

    /// Same operator with a different tightness.
    pub fn with_lambda(&self, lambda: f64) -> Result<Self> {
        Self::new(lambda, self.kind.clone())
    }

    pub fn apply(&self, x: &[f64]) -> Result<ProxResult> {
        let lambda = self.lambda;
        match &self.kind {
            ProxKind::WeightedL1 { weights } => prox_l1(x, lambda, weights),
            ProxKind::Nuclear { alpha, rows, cols } => {
                prox_nuclear_slice(x, *rows, *cols, lambda, *alpha)
            }
            ProxKind::Tv2d {
                alpha,
                rows,
                cols,
                tol,
                max_iter,
            } => prox_tv2d(x, *rows, *cols, lambda, *alpha, *tol, *max_iter),
            ProxKind::Numeric {
                function,
                tol,
                max_iter,
            } => prox_numeric_with_cap(function.as_ref(), x, lambda, *tol, *max_iter),
        }
    }
}

pub(crate) fn half_sq_dist_over(x: &[f64], p: &[f64], lambda: f64) -> f64 {
    x.iter()
        .zip(p)
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        / (2.0 * lambda)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn spec_rejects_bad_parameters() {
        let l1 = ProxKind::WeightedL1 {
            weights: vec![1.0, 0.0],
        };
        assert!(ProxSpec::new(0.1, l1).is_err());
        let ok = ProxKind::WeightedL1 {
            weights: vec![1.0, 2.0],
        };
        assert!(ProxSpec::new(0.0, ok.clone()).is_err());
        assert!(ProxSpec::new(-1.0, ok.clone()).is_err());
        assert!(ProxSpec::new(0.5, ok).is_ok());
        let tv = ProxKind::Tv2d {
            alpha: 1.0,
            rows: 2,
            cols: 2,
            tol: 0.0,
            max_iter: 10,
        };
        assert!(ProxSpec::new(0.5, tv).is_err());
    }

    #[test]
    fn dispatch_matches_direct_calls() {
        let spec = ProxSpec::new(
            0.5,
            ProxKind::WeightedL1 {
                weights: vec![1.0, 2.0],
            },
        )
        .unwrap();
        let via_spec = spec.apply(&[0.1, -3.0]).unwrap();
        let direct = prox_l1(&[0.1, -3.0], 0.5, &[1.0, 2.0]).unwrap();
        assert_eq!(via_spec, direct);
        let relaxed = spec.with_lambda(0.25).unwrap();
        assert_eq!(relaxed.lambda(), 0.25);
    }
}
