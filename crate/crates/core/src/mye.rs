//! Moreau-Yosida envelope values, gradients and closeness bounds.

use crate::error::{invalid, Result};
use crate::prox::ProxResult;

/// Gradient of the envelope `g^lambda` at `x`.
#[derive(Debug, Clone, PartialEq)]
pub struct MyeGradient {
    pub grad: Vec<f64>,
    /// The envelope gradient is `1/lambda`-Lipschitz.
    pub lipschitz_bound: f64,
}

/// `g^lambda(x) = g(p) + ||x - p||^2 / (2 lambda)` with `p` the prox at `x`.
pub fn mye_value<G>(g: G, prox: &ProxResult, x: &[f64], lambda: f64) -> f64
where
    G: Fn(&[f64]) -> f64,
{
    let sq: f64 = x
        .iter()
        .zip(&prox.point)
        .map(|(a, b)| (a - b) * (a - b))
        .sum();
    g(&prox.point) + sq / (2.0 * lambda)
}

/// `(x - p) / lambda`.
pub fn mye_gradient(x: &[f64], lambda: f64, prox: &ProxResult) -> MyeGradient {
    MyeGradient {
        grad: x
            .iter()
            .zip(&prox.point)
            .map(|(a, b)| (a - b) / lambda)
            .collect(),
        lipschitz_bound: 1.0 / lambda,
    }
}

/// How far the envelope can sit below an `L`-Lipschitz `g`, and the factor
/// bounding the change of expectations under the smoothed density.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MyeErrorBound {
    /// `sup_x g(x) - g^lambda(x) <= L^2 lambda / 2`.
    pub sup_gap: f64,
    /// `|E_smoothed f - E f| <= (exp(L^2 lambda) - 1) E|f|`.
    pub expectation_factor: f64,
}

pub fn mye_error_bound(lipschitz: f64, lambda: f64) -> Result<MyeErrorBound> {
    if !(lipschitz >= 0.0) || !(lambda > 0.0) {
        return invalid("need L >= 0 and lambda > 0");
    }
    let s = lipschitz * lipschitz * lambda;
    Ok(MyeErrorBound {
        sup_gap: 0.5 * s,
        expectation_factor: s.exp_m1(),
    })
}
