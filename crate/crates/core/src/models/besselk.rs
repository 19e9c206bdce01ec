use nalgebra::DMatrix;
use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, StandardNormal};

use super::bessel::{bessel_k_ratio, ln_bessel_k};
use crate::error::{invalid, Error, Result};
use crate::target::{BoundStrategy, TargetModel};

pub const DEFAULT_BESSEL_P: f64 = 0.002;
pub const DEFAULT_BESSEL_EPS: f64 = 0.05;

/// Logistic regression with an independent Bessel-K shrinkage prior.
///
/// `z` holds one row per parameter and one column per observation. The prior
/// is `(|x| + eps)^nu K_nu(|x| + eps)` with `nu = p - 1/2`.
#[derive(Debug, Clone)]
pub struct BesselKLogistic {
    z: DMatrix<f64>,
    y: Vec<f64>,
    p: f64,
    eps: f64,
    nu: f64,
    ln_k_eps: f64,
}

pub fn build_besselk_logistic(
    z: DMatrix<f64>,
    y: Vec<f64>,
    p: f64,
    eps: f64,
) -> Result<BesselKLogistic> {
    if !(p > 0.0 && p.is_finite()) || !(eps > 0.0 && eps.is_finite()) {
        return invalid("Bessel-K prior needs p > 0 and eps > 0");
    }
    if z.nrows() == 0 || z.ncols() != y.len() {
        return invalid(format!(
            "design is {}x{} but there are {} labels",
            z.nrows(),
            z.ncols(),
            y.len()
        ));
    }
    if y.iter().any(|l| *l != 1.0 && *l != -1.0) {
        return invalid("labels must be -1 or +1");
    }
    if z.iter().any(|a| !a.is_finite()) {
        return invalid("design matrix must be finite");
    }
    let nu = p - 0.5;
    Ok(BesselKLogistic {
        ln_k_eps: ln_bessel_k(nu, eps)?,
        z,
        y,
        p,
        eps,
        nu,
    })
}

/// `log(1 + e^t)` without overflow.
fn softplus(t: f64) -> f64 {
    if t > 0.0 {
        t + (-t).exp().ln_1p()
    } else {
        t.exp().ln_1p()
    }
}

fn logistic(t: f64) -> f64 {
    if t >= 0.0 {
        1.0 / (1.0 + (-t).exp())
    } else {
        let e = t.exp();
        e / (1.0 + e)
    }
}

impl BesselKLogistic {
    pub fn design(&self) -> &DMatrix<f64> {
        &self.z
    }

    pub fn labels(&self) -> &[f64] {
        &self.y
    }

    pub fn shape(&self) -> f64 {
        self.p
    }

    pub fn offset(&self) -> f64 {
        self.eps
    }

    /// `-log prior(x_i)`, shifted to vanish at `x_i = 0`.
    pub fn prior_potential(&self, xi: f64) -> f64 {
        let r = xi.abs() + self.eps;
        -(self.nu * (r / self.eps).ln() + ln_bessel_k(self.nu, r).unwrap_or(f64::NAN) - self.ln_k_eps)
    }

    /// `d/dx_i` of [`Self::prior_potential`] away from 0.
    pub fn prior_partial(&self, xi: f64) -> f64 {
        if xi == 0.0 {
            return 0.0;
        }
        xi.signum() * bessel_k_ratio(self.nu, xi.abs() + self.eps).unwrap_or(f64::NAN)
    }

    fn margins(&self, x: &[f64]) -> Vec<f64> {
        (0..self.z.ncols())
            .map(|j| {
                let col = self.z.column(j);
                col.iter().zip(x).map(|(a, b)| a * b).sum::<f64>() * self.y[j]
            })
            .collect()
    }

    fn likelihood_partial(&self, i: usize, margins: &[f64]) -> f64 {
        margins
            .iter()
            .enumerate()
            .map(|(j, m)| -self.y[j] * self.z[(i, j)] * logistic(-m))
            .sum()
    }

    /// Global constant bound `sum_j |Z_ij| + K_{nu-1}(eps)/K_nu(eps)` on the
    /// Zig-Zag rate of each coordinate.
    pub fn zz_bounds(&self) -> Result<Vec<BoundStrategy>> {
        let prior = bessel_k_ratio(self.nu, self.eps)?;
        Ok((0..self.z.nrows())
            .map(|i| {
                let lik: f64 = self.z.row(i).iter().map(|a| a.abs()).sum();
                BoundStrategy::constant(lik + prior).with_lookahead(f64::INFINITY)
            })
            .collect())
    }
}

impl TargetModel for BesselKLogistic {
    fn dim(&self) -> usize {
        self.z.nrows()
    }

    fn potential(&self, x: &[f64]) -> f64 {
        let lik: f64 = self.margins(x).iter().map(|m| softplus(-m)).sum();
        lik + x.iter().map(|xi| self.prior_potential(*xi)).sum::<f64>()
    }

    fn partial(&self, i: usize, x: &[f64]) -> f64 {
        let m = self.margins(x);
        self.likelihood_partial(i, &m) + self.prior_partial(x[i])
    }

    fn gradient(&self, x: &[f64], out: &mut [f64]) {
        let m = self.margins(x);
        for (i, o) in out.iter_mut().enumerate() {
            *o = self.likelihood_partial(i, &m) + self.prior_partial(x[i]);
        }
    }

    fn is_kink(&self, i: usize, x: &[f64]) -> bool {
        x[i] == 0.0
    }
}

/// Seeded stand-in for a gene-expression classification data set.
#[derive(Debug, Clone)]
pub struct SyntheticLogistic {
    pub design: DMatrix<f64>,
    pub labels: Vec<f64>,
    pub truth: Vec<f64>,
    pub signals: Vec<usize>,
}

/// Standardized Gaussian covariates, `n_signals` planted coefficients of
/// size `magnitude` with random signs, Bernoulli-logistic labels.
pub fn synthetic_logistic(
    n_params: usize,
    n_obs: usize,
    n_signals: usize,
    magnitude: f64,
    seed: u64,
) -> Result<SyntheticLogistic> {
    if n_params == 0 || n_obs < 2 || n_signals > n_params {
        return Err(Error::InvalidArgument(format!(
            "cannot plant {n_signals} signals among {n_params} parameters with {n_obs} observations"
        )));
    }
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let mut design = DMatrix::from_fn(n_params, n_obs, |_, _| {
        let z: f64 = StandardNormal.sample(&mut rng);
        z
    });
    for mut row in design.row_iter_mut() {
        let mean = row.mean();
        row.add_scalar_mut(-mean);
        let sd = (row.norm_squared() / (n_obs - 1) as f64).sqrt();
        if sd > 0.0 {
            row /= sd;
        }
    }
    let mut signals = sample(&mut rng, n_params, n_signals).into_vec();
    signals.sort_unstable();
    let mut truth = vec![0.0; n_params];
    for &s in &signals {
        truth[s] = if rng.random::<bool>() { magnitude } else { -magnitude };
    }
    let labels = (0..n_obs)
        .map(|j| {
            let m: f64 = design.column(j).iter().zip(&truth).map(|(a, b)| a * b).sum();
            if rng.random::<f64>() < logistic(m) {
                1.0
            } else {
                -1.0
            }
        })
        .collect();
    Ok(SyntheticLogistic {
        design,
        labels,
        truth,
        signals,
    })
}
