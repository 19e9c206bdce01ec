use rand::Rng;
use rand_distr::StandardNormal;

use super::DIVERGENCE_THRESHOLD;
use crate::error::{invalid, Error, Result};
use crate::target::{smoothed_grad_into, TargetModel};

/// Step size `delta` and envelope tightness `lambda` of MY-ULA.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UlaConfig {
    pub delta: f64,
    pub lambda: f64,
}

impl UlaConfig {
    pub fn new(delta: f64, lambda: f64) -> Result<Self> {
        if !(delta > 0.0 && delta.is_finite()) || !(lambda > 0.0 && lambda.is_finite()) {
            return invalid("step size and lambda must be positive");
        }
        Ok(Self { delta, lambda })
    }
}

/// Parameters of the underdamped scheme with its per-dimension noise law.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UulaConfig {
    pub nu: f64,
    pub gamma: f64,
    pub xi: f64,
    pub lambda: f64,
    beta: f64,
    cov: [f64; 3],
    chol: [f64; 3],
}

/// `2a - 3 + 4 e^{-a} - e^{-2a}`, accurate for small `a`.
fn position_variance_kernel(a: f64) -> f64 {
    if a < 0.05 {
        let coef = [
            2.0 / 3.0,
            -0.5,
            7.0 / 30.0,
            -1.0 / 12.0,
            31.0 / 1260.0,
            -1.0 / 160.0,
            127.0 / 90720.0,
        ];
        let poly = coef.iter().rev().fold(0.0, |acc, c| acc * a + c);
        a * a * a * poly
    } else {
        let m = (-a).exp_m1();
        2.0 * (a + m) - m * m
    }
}

impl UulaConfig {
    pub fn new(lambda: f64, nu: f64, gamma: f64, xi: f64) -> Result<Self> {
        for (name, v) in [("lambda", lambda), ("nu", nu), ("gamma", gamma), ("xi", xi)] {
            if !(v > 0.0 && v.is_finite()) {
                return invalid(format!("{name} must be positive and finite"));
            }
        }
        let a = gamma * xi * nu;
        let beta = (-a).exp();
        if !(beta > 0.0 && beta < 1.0) {
            return invalid(format!("beta = exp(-gamma xi nu) = {beta} is not in (0, 1)"));
        }
        let one_minus_beta = -(-a).exp_m1();
        let gx = gamma * xi;
        let sxx = position_variance_kernel(a) / (gamma * gx);
        let sxv = one_minus_beta * one_minus_beta / gx;
        let svv = -(-2.0 * a).exp_m1() / xi;
        if !(sxx > 0.0) || !(svv > 0.0) {
            return invalid("noise covariance is not positive definite");
        }
        let l11 = sxx.sqrt();
        let l21 = sxv / l11;
        let rest = svv - l21 * l21;
        if rest < 0.0 {
            return invalid(format!(
                "noise covariance is not positive semidefinite (Schur complement {rest})"
            ));
        }
        Ok(Self {
            nu,
            gamma,
            xi,
            lambda,
            beta,
            cov: [sxx, sxv, svv],
            chol: [l11, l21, rest.sqrt()],
        })
    }

    /// `nu = 2 lambda`, `gamma = 2`, `xi = 1 / lambda`.
    pub fn with_defaults(lambda: f64) -> Result<Self> {
        Self::new(lambda, 2.0 * lambda, 2.0, 1.0 / lambda)
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    /// `(Sigma_xx, Sigma_xv, Sigma_vv)` of the noise in one dimension.
    pub fn covariance(&self) -> (f64, f64, f64) {
        (self.cov[0], self.cov[1], self.cov[2])
    }

    /// One noise pair `(W_x, W_v)` from two standard normal draws.
    pub fn correlate(&self, z1: f64, z2: f64) -> (f64, f64) {
        let [l11, l21, l22] = self.chol;
        (l11 * z1, l21 * z1 + l22 * z2)
    }
}

/// Gradient driving the chains: smoothed when the model has a split,
/// exact (with zeros at kinks) otherwise.
pub fn drift_gradient(
    model: &dyn TargetModel,
    x: &[f64],
    lambda: f64,
    out: &mut [f64],
) -> Result<()> {
    if model.split().is_some() {
        smoothed_grad_into(model, x, lambda, out)?;
    } else {
        model.gradient(x, out);
        for (i, g) in out.iter_mut().enumerate() {
            if model.is_kink(i, x) {
                *g = 0.0;
            }
        }
    }
    if out.iter().any(|g| !g.is_finite()) {
        return Err(Error::Diverged {
            step: 0,
            state: x.to_vec(),
        });
    }
    Ok(())
}

pub(crate) fn check_finite(x: &[f64]) -> Result<()> {
    if x.iter().any(|a| !(a.abs() <= DIVERGENCE_THRESHOLD)) {
        return Err(Error::Diverged {
            step: 0,
            state: x.to_vec(),
        });
    }
    Ok(())
}

/// `x - delta g + sqrt(2 delta) z` for a given gradient and noise draw.
pub(crate) fn ula_move(x: &[f64], g: &[f64], delta: f64, z: &[f64]) -> Vec<f64> {
    let s = (2.0 * delta).sqrt();
    (0..x.len()).map(|i| x[i] - delta * g[i] + s * z[i]).collect()
}

/// `x - delta grad U_lambda(x) + sqrt(2 delta) xi`.
pub fn my_ula_step<R: Rng + ?Sized>(
    x: &[f64],
    cfg: &UlaConfig,
    model: &dyn TargetModel,
    rng: &mut R,
) -> Result<Vec<f64>> {
    let mut g = vec![0.0; x.len()];
    drift_gradient(model, x, cfg.lambda, &mut g)?;
    let z: Vec<f64> = (0..x.len()).map(|_| rng.sample(StandardNormal)).collect();
    let out = ula_move(x, &g, cfg.delta, &z);
    check_finite(&out)?;
    Ok(out)
}

/// One step of the second-order underdamped scheme.
pub fn my_uula_step<R: Rng + ?Sized>(
    x: &[f64],
    v: &[f64],
    cfg: &UulaConfig,
    model: &dyn TargetModel,
    rng: &mut R,
) -> Result<(Vec<f64>, Vec<f64>)> {
    if v.len() != x.len() {
        return invalid("position and velocity dimensions differ");
    }
    let mut g = vec![0.0; x.len()];
    drift_gradient(model, x, cfg.lambda, &mut g)?;
    let w: Vec<(f64, f64)> = (0..x.len())
        .map(|_| cfg.correlate(rng.sample(StandardNormal), rng.sample(StandardNormal)))
        .collect();
    let (xn, vn) = uula_move(x, v, &g, cfg, &w);
    check_finite(&xn)?;
    check_finite(&vn)?;
    Ok((xn, vn))
}

/// The underdamped update for a given gradient and noise `(W_x, W_v)`.
pub(crate) fn uula_move(
    x: &[f64],
    v: &[f64],
    g: &[f64],
    cfg: &UulaConfig,
    w: &[(f64, f64)],
) -> (Vec<f64>, Vec<f64>) {
    let beta = cfg.beta;
    let one_minus_beta = 1.0 - beta;
    let gx = cfg.gamma * cfg.xi;
    let cx = (cfg.nu - one_minus_beta / gx) / cfg.gamma;
    let cv = one_minus_beta / gx;
    (0..x.len())
        .map(|i| {
            (
                x[i] + one_minus_beta / cfg.gamma * v[i] - cx * g[i] + w[i].0,
                beta * v[i] - cv * g[i] + w[i].1,
            )
        })
        .unzip()
}

/// Proximal MALA: a Langevin proposal on the envelope with `lambda =
/// delta / 2`, accepted or rejected against the exact target.
pub fn pmala_step<R: Rng + ?Sized>(
    x: &[f64],
    delta: f64,
    model: &dyn TargetModel,
    rng: &mut R,
) -> Result<(Vec<f64>, bool)> {
    if !(delta > 0.0) {
        return invalid("step size must be positive");
    }
    let lambda = 0.5 * delta;
    let n = x.len();
    let mut gx = vec![0.0; n];
    drift_gradient(model, x, lambda, &mut gx)?;
    let s = delta.sqrt();
    let y: Vec<f64> = (0..n)
        .map(|i| x[i] - 0.5 * delta * gx[i] + s * rng.sample::<f64, _>(StandardNormal))
        .collect();
    let uy = model.potential(&y);
    let u: f64 = rng.random();
    if !uy.is_finite() {
        return Ok((x.to_vec(), false));
    }
    let mut gy = vec![0.0; n];
    drift_gradient(model, &y, lambda, &mut gy)?;
    let log_q = |to: &[f64], from: &[f64], g: &[f64]| -> f64 {
        -(0..n)
            .map(|i| (to[i] - from[i] + 0.5 * delta * g[i]).powi(2))
            .sum::<f64>()
            / (2.0 * delta)
    };
    let log_alpha = model.potential(x) - uy + log_q(x, &y, &gy) - log_q(&y, x, &gx);
    if u.ln() < log_alpha {
        check_finite(&y)?;
        Ok((y, true))
    } else {
        Ok((x.to_vec(), false))
    }
}
