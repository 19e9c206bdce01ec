use rand::RngCore;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{invalid, Result};
use crate::pdmp::RateProfile;
use crate::target::{Factor, FactorGraph, TargetModel};

/// Centred Gaussian with diagonal covariance.
#[derive(Debug, Clone)]
pub struct AnisotropicGaussian {
    variances: Vec<f64>,
    precision: Vec<f64>,
    factors: Vec<Factor>,
}

/// `Sigma_ii = 1 / i^2` for `i = 1..=n`.
pub fn default_variances(n: usize) -> Vec<f64> {
    (1..=n).map(|i| 1.0 / (i * i) as f64).collect()
}

pub fn build_gaussian(variances: Vec<f64>) -> Result<AnisotropicGaussian> {
    if variances.is_empty() || variances.iter().any(|s| !(*s > 0.0 && s.is_finite())) {
        return invalid("variances must be positive and finite");
    }
    let factors = (0..variances.len())
        .map(|i| Factor {
            coords: vec![i],
            bound: None,
        })
        .collect();
    Ok(AnisotropicGaussian {
        precision: variances.iter().map(|s| 1.0 / s).collect(),
        variances,
        factors,
    })
}

impl AnisotropicGaussian {
    pub fn variances(&self) -> &[f64] {
        &self.variances
    }
}

impl TargetModel for AnisotropicGaussian {
    fn dim(&self) -> usize {
        self.variances.len()
    }

    fn potential(&self, x: &[f64]) -> f64 {
        0.5 * x
            .iter()
            .zip(&self.precision)
            .map(|(x, p)| p * x * x)
            .sum::<f64>()
    }

    fn partial(&self, i: usize, x: &[f64]) -> f64 {
        self.precision[i] * x[i]
    }

    fn factor_graph(&self) -> Option<&dyn FactorGraph> {
        Some(self)
    }

    fn coordinate_rate_profile(&self, i: usize, x: &[f64], v: &[f64]) -> Option<RateProfile> {
        self.factor_rate_profile(i, x, v)
    }

    fn directional_rate_profile(&self, x: &[f64], v: &[f64]) -> Option<RateProfile> {
        let (mut a, mut b) = (0.0, 0.0);
        for ((x, v), p) in x.iter().zip(v).zip(&self.precision) {
            a += p * x * v;
            b += p * v * v;
        }
        Some(RateProfile::Linear {
            intercept: a,
            slope: b,
        })
    }

    fn random_point(&self, rng: &mut dyn RngCore) -> Vec<f64> {
        self.variances
            .iter()
            .map(|s| {
                let z: f64 = StandardNormal.sample(&mut *rng);
                s.sqrt() * z
            })
            .collect()
    }
}

impl FactorGraph for AnisotropicGaussian {
    fn factors(&self) -> &[Factor] {
        &self.factors
    }

    fn factor_potential(&self, k: usize, x: &[f64]) -> f64 {
        0.5 * self.precision[k] * x[k] * x[k]
    }

    fn factor_gradient(&self, k: usize, x: &[f64], out: &mut [f64]) {
        out[0] = self.precision[k] * x[k];
    }

    fn factor_rate_profile(&self, k: usize, x: &[f64], v: &[f64]) -> Option<RateProfile> {
        let p = self.precision[k];
        Some(RateProfile::Linear {
            intercept: p * x[k] * v[k],
            slope: p * v[k] * v[k],
        })
    }
}
