//! Posterior targets `pi(x) ∝ exp(-U(x))` whose potential may fail to be
//! differentiable on a Lebesgue-null set.
//!
//! Wherever a partial derivative does not exist the models report 0 for it.
//! Kinks are declared by each model through [`TargetModel::is_kink`] rather
//! than detected numerically.

use std::fmt;
use std::sync::Arc;

use rand::RngCore;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::pdmp::RateProfile;
use crate::prox::{ProxKind, ProxSpec};

/// Closed interval constraint on one coordinate; either end may be infinite.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

impl Interval {
    pub const REAL_LINE: Interval = Interval {
        lo: f64::NEG_INFINITY,
        hi: f64::INFINITY,
    };

    pub fn positive() -> Self {
        Self {
            lo: 0.0,
            hi: f64::INFINITY,
        }
    }
}

/// A posterior potential with gradients under the zero convention.
pub trait TargetModel: Send + Sync {
    fn dim(&self) -> usize;

    /// `U(x) = -log pi(x)` up to an additive constant.
    fn potential(&self, x: &[f64]) -> f64;

    /// `dU/dx_i`, or 0 where it does not exist.
    fn partial(&self, i: usize, x: &[f64]) -> f64;

    fn gradient(&self, x: &[f64], out: &mut [f64]) {
        for (i, o) in out.iter_mut().enumerate() {
            *o = self.partial(i, x);
        }
    }

    /// Whether `dU/dx_i` fails to exist at `x`.
    fn is_kink(&self, _i: usize, _x: &[f64]) -> bool {
        false
    }

    /// Smooth/non-smooth decomposition used by the Moreau-Yosida samplers.
    fn split(&self) -> Option<&dyn NonsmoothSplit> {
        None
    }

    fn factor_graph(&self) -> Option<&dyn FactorGraph> {
        None
    }

    /// Gaussian component used by the Hamiltonian bouncy particle sampler.
    fn hamiltonian_split(&self) -> Option<&dyn HamiltonianSplit> {
        None
    }

    /// Closed form of `t -> max(0, dU/dx_i(x + v t) v_i)` when available.
    fn coordinate_rate_profile(&self, _i: usize, _x: &[f64], _v: &[f64]) -> Option<RateProfile> {
        None
    }

    /// Closed form of `t -> max(0, <v, grad U(x + v t)>)` when available.
    fn directional_rate_profile(&self, _x: &[f64], _v: &[f64]) -> Option<RateProfile> {
        None
    }

    /// Per-coordinate support; `None` means all of R^n.
    fn domain(&self) -> Option<&[Interval]> {
        None
    }

    /// Maps a point to its canonical representative (e.g. wraps angles).
    fn canonicalize(&self, _x: &mut [f64]) {}

    /// A random point inside the support, used by validation routines.
    fn random_point(&self, rng: &mut dyn RngCore) -> Vec<f64> {
        (0..self.dim())
            .map(|_| StandardNormal.sample(&mut *rng))
            .collect()
    }
}

/// `U = smooth + g` with `g` convex and handled through its prox.
pub trait NonsmoothSplit: Send + Sync {
    /// The smooth part, `-log likelihood` in the usual Bayesian reading.
    fn smooth_potential(&self, x: &[f64]) -> f64;

    fn smooth_gradient(&self, x: &[f64], out: &mut [f64]);

    /// The non-smooth convex part `g`, e.g. `-log prior`.
    fn nonsmooth(&self) -> &ProxKind;
}

/// One additive piece `U_k` of the potential, depending on `coords` only.
#[derive(Clone, Debug)]
pub struct Factor {
    pub coords: Vec<usize>,
    pub bound: Option<BoundStrategy>,
}

/// `U(x) = sum_k U_k(x_{coords_k}) + c`; coordinate sets may overlap.
pub trait FactorGraph: Send + Sync {
    fn factors(&self) -> &[Factor];

    /// `U_k` evaluated at the full state `x`.
    fn factor_potential(&self, k: usize, x: &[f64]) -> f64;

    /// Gradient of `U_k`, written in the order of `factors()[k].coords`.
    fn factor_gradient(&self, k: usize, x: &[f64], out: &mut [f64]);

    /// Closed form of `t -> max(0, <v_k, grad U_k(x + v t)>)` when available.
    fn factor_rate_profile(&self, _k: usize, _x: &[f64], _v: &[f64]) -> Option<RateProfile> {
        None
    }
}

/// `U = V + U_hat` with `V(x) = ||x - center||^2 / (2 sigma^2)`.
pub trait HamiltonianSplit: Send + Sync {
    fn center(&self) -> &[f64];
    fn sigma(&self) -> f64;
    fn residual_potential(&self, x: &[f64]) -> f64;
    fn residual_gradient(&self, x: &[f64], out: &mut [f64]);
    /// Valid for all times when the Gaussian energy
    /// `||x - center||^2 / (2 sigma^2) + ||v||^2 / 2` is fixed.
    fn residual_rate_bound(&self, x: &[f64], v: &[f64]) -> Option<f64> {
        let _ = (x, v);
        None
    }
}

/// Upper bound for a Poisson rate over one look-ahead window.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WindowBound {
    /// Bound at the start of the window.
    pub intercept: f64,
    /// Increase per unit time.
    pub slope: f64,
    /// Length of the window on which the bound holds.
    pub horizon: f64,
}

pub type WindowBoundFn = Arc<dyn Fn(&[f64], &[f64], f64) -> WindowBound + Send + Sync>;

#[derive(Clone)]
pub enum BoundKind {
    /// The same constant on every window.
    Constant(f64),
    /// `(a + b t)^+` built from the state `(x, v)` at the window start and
    /// the look-ahead; the callable may shorten the window.
    LinearInTime(WindowBoundFn),
    /// Rate at the end of the window; valid when the rate is non-decreasing
    /// along the flow, as it is for convex potentials.
    ConvexEndpoint,
}

impl fmt::Debug for BoundKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BoundKind::Constant(c) => f.debug_tuple("Constant").field(c).finish(),
            BoundKind::LinearInTime(_) => f.write_str("LinearInTime(..)"),
            BoundKind::ConvexEndpoint => f.write_str("ConvexEndpoint"),
        }
    }
}

pub const DEFAULT_LOOKAHEAD: f64 = 1.0;
pub const DEFAULT_SAFETY: f64 = 1e-9;

/// How thinning bounds a rate: the bound family, the look-ahead `theta` and
/// a relative safety margin `gamma` (`bound * (1 + gamma)` is used).
#[derive(Debug, Clone)]
pub struct BoundStrategy {
    pub kind: BoundKind,
    pub lookahead: f64,
    pub safety: f64,
}

impl BoundStrategy {
    pub fn constant(rate: f64) -> Self {
        Self::from_kind(BoundKind::Constant(rate))
    }

    pub fn linear<F>(f: F) -> Self
    where
        F: Fn(&[f64], &[f64], f64) -> WindowBound + Send + Sync + 'static,
    {
        Self::from_kind(BoundKind::LinearInTime(Arc::new(f)))
    }

    pub fn convex_endpoint() -> Self {
        Self::from_kind(BoundKind::ConvexEndpoint)
    }

    fn from_kind(kind: BoundKind) -> Self {
        Self {
            kind,
            lookahead: DEFAULT_LOOKAHEAD,
            safety: DEFAULT_SAFETY,
        }
    }

    pub fn with_lookahead(mut self, theta: f64) -> Self {
        self.lookahead = theta;
        self
    }

    pub fn with_safety(mut self, gamma: f64) -> Self {
        self.safety = gamma;
        self
    }
}

/// Full gradient with undefined partials set to zero.
pub fn grad_with_convention(model: &dyn TargetModel, x: &[f64]) -> Result<Vec<f64>> {
    check_dim(model, x)?;
    if !model.potential(x).is_finite() {
        return Err(Error::Domain);
    }
    let mut g = vec![0.0; x.len()];
    model.gradient(x, &mut g);
    for (i, gi) in g.iter_mut().enumerate() {
        if model.is_kink(i, x) {
            *gi = 0.0;
        }
    }
    Ok(g)
}

/// `grad U_lambda(x) = grad smooth(x) + (x - prox_lambda g(x)) / lambda`.
pub fn smoothed_grad(model: &dyn TargetModel, x: &[f64], lambda: f64) -> Result<Vec<f64>> {
    let mut out = vec![0.0; x.len()];
    smoothed_grad_into(model, x, lambda, &mut out)?;
    Ok(out)
}

pub fn smoothed_grad_into(
    model: &dyn TargetModel,
    x: &[f64],
    lambda: f64,
    out: &mut [f64],
) -> Result<()> {
    check_dim(model, x)?;
    let split = model
        .split()
        .ok_or_else(|| Error::Unsupported("model has no smooth/non-smooth split".into()))?;
    let prox = ProxSpec::new(lambda, split.nonsmooth().clone())?.apply(x)?;
    split.smooth_gradient(x, out);
    for ((o, xi), pi) in out.iter_mut().zip(x).zip(&prox.point) {
        *o += (xi - pi) / lambda;
    }
    Ok(())
}

/// `smooth(x) + g^lambda(x)`, the potential of the smoothed target.
pub fn smoothed_potential(model: &dyn TargetModel, x: &[f64], lambda: f64) -> Result<f64> {
    let split = model
        .split()
        .ok_or_else(|| Error::Unsupported("model has no smooth/non-smooth split".into()))?;
    let g = split.nonsmooth();
    let prox = ProxSpec::new(lambda, g.clone())?.apply(x)?;
    Ok(split.smooth_potential(x) + crate::mye::mye_value(|u| g.value(u), &prox, x, lambda))
}

fn check_dim(model: &dyn TargetModel, x: &[f64]) -> Result<()> {
    if x.len() != model.dim() {
        return Err(Error::InvalidArgument(format!(
            "state has {} coordinates, model expects {}",
            x.len(),
            model.dim()
        )));
    }
    Ok(())
}

/// Outcome of [`validate_factors`].
#[derive(Debug, Clone, PartialEq)]
pub struct FactorReport {
    pub n_factors: usize,
    pub n_points: usize,
    /// Additive constant `sum_k U_k - U`, fixed at the first point.
    pub offset: f64,
    pub max_residual: f64,
}

/// Checks that factors cover every coordinate and add up to the potential.
pub fn validate_factors(
    model: &dyn TargetModel,
    n_points: usize,
    tol: f64,
    rng: &mut dyn RngCore,
) -> Result<FactorReport> {
    let graph = model
        .factor_graph()
        .ok_or_else(|| Error::Unsupported("model has no factor decomposition".into()))?;
    let factors = graph.factors();
    let mut covered = vec![false; model.dim()];
    for f in factors {
        for &c in &f.coords {
            if c >= covered.len() {
                return Err(Error::ValidationFailure(format!(
                    "factor references coordinate {c} outside dimension {}",
                    covered.len()
                )));
            }
            covered[c] = true;
        }
    }
    if let Some(missing) = covered.iter().position(|c| !c) {
        return Err(Error::ValidationFailure(format!(
            "coordinate {missing} is not covered by any factor"
        )));
    }
    let mut offset = None;
    let mut worst = (0.0f64, 0usize);
    for p in 0..n_points.max(1) {
        let x = model.random_point(rng);
        let sum: f64 = (0..factors.len())
            .map(|k| graph.factor_potential(k, &x))
            .sum();
        let diff = sum - model.potential(&x);
        let c = *offset.get_or_insert(diff);
        let r = (diff - c).abs();
        if !(r <= worst.0) {
            worst = (r, p);
        }
    }
    if !(worst.0 <= tol) {
        return Err(Error::ValidationFailure(format!(
            "factor sum misses the potential by {} at random point #{}",
            worst.0, worst.1
        )));
    }
    Ok(FactorReport {
        n_factors: factors.len(),
        n_points: n_points.max(1),
        offset: offset.unwrap_or(0.0),
        max_residual: worst.0,
    })
}
