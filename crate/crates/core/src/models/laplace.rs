use rand::RngCore;
use rand_distr::{Distribution, Exp1};

use crate::error::{invalid, Result};
use crate::pdmp::RateProfile;
use crate::prox::ProxKind;
use crate::target::{
    BoundStrategy, Factor, FactorGraph, NonsmoothSplit, TargetModel, WindowBound,
};

/// `pi(x) ∝ exp(-sum_i beta_i |x_i|)`.
#[derive(Debug, Clone)]
pub struct AnisotropicLaplace {
    beta: Vec<f64>,
    prox: ProxKind,
    factors: Vec<Factor>,
}

pub fn build_laplace(beta: Vec<f64>) -> Result<AnisotropicLaplace> {
    if beta.is_empty() || beta.iter().any(|b| !(*b > 0.0 && b.is_finite())) {
        return invalid("Laplace rates must be positive and finite");
    }
    let factors = (0..beta.len())
        .map(|i| Factor {
            coords: vec![i],
            bound: None,
        })
        .collect();
    Ok(AnisotropicLaplace {
        prox: ProxKind::WeightedL1 {
            weights: beta.clone(),
        },
        beta,
        factors,
    })
}

impl AnisotropicLaplace {
    pub fn beta(&self) -> &[f64] {
        &self.beta
    }

    /// Marginal CDF of coordinate `i`.
    pub fn marginal_cdf(&self, i: usize, x: f64) -> f64 {
        let b = self.beta[i];
        if x < 0.0 {
            0.5 * (b * x).exp()
        } else {
            1.0 - 0.5 * (-b * x).exp()
        }
    }

    /// Constant bound `sum_i beta_i |v_i|` for the global bounce rate.
    pub fn bps_bound(&self) -> BoundStrategy {
        let beta = self.beta.clone();
        BoundStrategy::linear(move |_x, v, theta| WindowBound {
            intercept: beta.iter().zip(v).map(|(b, v)| b * v.abs()).sum(),
            slope: 0.0,
            horizon: theta,
        })
    }

    fn profile(&self, i: usize, x: f64, v: f64) -> RateProfile {
        let rate = self.beta[i] * v.abs();
        if v == 0.0 {
            return RateProfile::PiecewiseConstant { delay: 0.0, rate: 0.0 };
        }
        // heading to the mode: silent until the kink is crossed
        let delay = if x * v < 0.0 { x.abs() / v.abs() } else { 0.0 };
        RateProfile::PiecewiseConstant { delay, rate }
    }
}

impl TargetModel for AnisotropicLaplace {
    fn dim(&self) -> usize {
        self.beta.len()
    }

    fn potential(&self, x: &[f64]) -> f64 {
        x.iter().zip(&self.beta).map(|(x, b)| b * x.abs()).sum()
    }

    fn partial(&self, i: usize, x: &[f64]) -> f64 {
        if x[i] == 0.0 {
            0.0
        } else {
            self.beta[i] * x[i].signum()
        }
    }

    fn is_kink(&self, i: usize, x: &[f64]) -> bool {
        x[i] == 0.0
    }

    fn split(&self) -> Option<&dyn NonsmoothSplit> {
        Some(self)
    }

    fn factor_graph(&self) -> Option<&dyn FactorGraph> {
        Some(self)
    }

    fn coordinate_rate_profile(&self, i: usize, x: &[f64], v: &[f64]) -> Option<RateProfile> {
        Some(self.profile(i, x[i], v[i]))
    }

    fn random_point(&self, rng: &mut dyn RngCore) -> Vec<f64> {
        self.beta
            .iter()
            .map(|b| {
                let e: f64 = Exp1.sample(&mut *rng);
                let sign = if rng.next_u32() & 1 == 0 { 1.0 } else { -1.0 };
                sign * e / b
            })
            .collect()
    }
}

impl NonsmoothSplit for AnisotropicLaplace {
    fn smooth_potential(&self, _x: &[f64]) -> f64 {
        0.0
    }

    fn smooth_gradient(&self, _x: &[f64], out: &mut [f64]) {
        out.fill(0.0);
    }

    fn nonsmooth(&self) -> &ProxKind {
        &self.prox
    }
}

impl FactorGraph for AnisotropicLaplace {
    fn factors(&self) -> &[Factor] {
        &self.factors
    }

    fn factor_potential(&self, k: usize, x: &[f64]) -> f64 {
        self.beta[k] * x[k].abs()
    }

    fn factor_gradient(&self, k: usize, x: &[f64], out: &mut [f64]) {
        out[0] = self.partial(k, x);
    }

    fn factor_rate_profile(&self, k: usize, x: &[f64], v: &[f64]) -> Option<RateProfile> {
        Some(self.profile(k, x[k], v[k]))
    }
}
