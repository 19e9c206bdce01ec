use nalgebra::DMatrix;
use rand::RngCore;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{invalid, Result};
use crate::prox::{nuclear_norm, prox_nuclear_slice, ProxKind};
use crate::target::{
    BoundStrategy, HamiltonianSplit, NonsmoothSplit, TargetModel, WindowBound,
};

/// Matrix denoising, `U(x) = ||x - y||_F^2 / (2 sigma^2) + alpha ||x||_*`.
///
/// Matrices are stored row-major.
#[derive(Debug, Clone)]
pub struct NuclearNormDenoise {
    y: Vec<f64>,
    rows: usize,
    cols: usize,
    sigma: f64,
    alpha: f64,
    prox: ProxKind,
    residual: Residual,
}

/// How the Hamiltonian sampler treats `alpha ||x||_*`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Residual {
    /// Gradient of the Moreau-Yosida envelope with this tightness.
    Envelope(f64),
    /// `alpha U V^T` from the SVD of `x`.
    Exact,
}

pub fn build_nuclear(y: &DMatrix<f64>, sigma: f64, alpha: f64) -> Result<NuclearNormDenoise> {
    if !(sigma > 0.0 && sigma.is_finite()) || !(alpha >= 0.0 && alpha.is_finite()) {
        return invalid("nuclear model needs sigma > 0 and alpha >= 0");
    }
    let (rows, cols) = y.shape();
    if rows == 0 || cols == 0 {
        return invalid("observed matrix is empty");
    }
    let flat: Vec<f64> = (0..rows)
        .flat_map(|i| (0..cols).map(move |j| (i, j)))
        .map(|ij| y[ij])
        .collect();
    Ok(NuclearNormDenoise {
        y: flat,
        rows,
        cols,
        sigma,
        alpha,
        prox: ProxKind::Nuclear { alpha, rows, cols },
        residual: Residual::Envelope(sigma * sigma / 100.0),
    })
}

/// `(-1)^(i+j)` scaled by `amplitude`: a rank-one checkerboard.
pub fn checkerboard(rows: usize, cols: usize, amplitude: f64) -> DMatrix<f64> {
    DMatrix::from_fn(rows, cols, |i, j| {
        if (i + j) % 2 == 0 {
            amplitude
        } else {
            -amplitude
        }
    })
}

impl NuclearNormDenoise {
    pub fn with_residual(mut self, residual: Residual) -> Result<Self> {
        if let Residual::Envelope(l) = residual {
            if !(l > 0.0 && l.is_finite()) {
                return invalid("envelope tightness must be positive");
            }
        }
        self.residual = residual;
        Ok(self)
    }

    pub fn observation(&self) -> &[f64] {
        &self.y
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn noise_sigma(&self) -> f64 {
        self.sigma
    }

    /// `U V^T` over all singular pairs of `x`.
    fn polar_factor(&self, x: &[f64]) -> Vec<f64> {
        let m = DMatrix::from_row_slice(self.rows, self.cols, x);
        let Some(svd) = m.try_svd(true, true, f64::EPSILON, 10_000) else {
            return vec![f64::NAN; x.len()];
        };
        let (Some(u), Some(vt)) = (svd.u, svd.v_t) else {
            return vec![f64::NAN; x.len()];
        };
        let p = u * vt;
        (0..self.rows)
            .flat_map(|i| (0..self.cols).map(move |j| (i, j)))
            .map(|ij| p[ij])
            .collect()
    }

    fn min_dim(&self) -> f64 {
        self.rows.min(self.cols) as f64
    }

    /// `a + b t` bounds on each Zig-Zag rate, using `|(U V^T)_ij| <= 1`.
    pub fn zz_bounds(&self) -> Vec<BoundStrategy> {
        (0..self.y.len())
            .map(|i| {
                let (yi, s2, alpha) = (self.y[i], self.sigma * self.sigma, self.alpha);
                BoundStrategy::linear(move |x, v, theta| WindowBound {
                    intercept: (x[i] - yi) * v[i] / s2 + alpha * v[i].abs(),
                    slope: v[i] * v[i] / s2,
                    horizon: theta,
                })
            })
            .collect()
    }

    /// `a + b t` bound on the bouncy particle rate, using
    /// `||U V^T||_F <= sqrt(min(rows, cols))`.
    pub fn bps_bound(&self) -> BoundStrategy {
        let (y, s2, alpha, k) = (self.y.clone(), self.sigma * self.sigma, self.alpha, self.min_dim());
        BoundStrategy::linear(move |x, v, theta| {
            let mut a = 0.0;
            let mut vv = 0.0;
            for ((x, y), v) in x.iter().zip(&y).zip(v) {
                a += (x - y) * v / s2;
                vv += v * v;
            }
            WindowBound {
                intercept: a + alpha * k.sqrt() * vv.sqrt(),
                slope: vv / s2,
                horizon: theta,
            }
        })
    }
}

impl TargetModel for NuclearNormDenoise {
    fn dim(&self) -> usize {
        self.y.len()
    }

    fn potential(&self, x: &[f64]) -> f64 {
        let fit: f64 = x.iter().zip(&self.y).map(|(a, b)| (a - b) * (a - b)).sum();
        let pen = if self.alpha > 0.0 {
            self.alpha * nuclear_norm(x, self.rows, self.cols)
        } else {
            0.0
        };
        fit / (2.0 * self.sigma * self.sigma) + pen
    }

    fn partial(&self, i: usize, x: &[f64]) -> f64 {
        let fit = (x[i] - self.y[i]) / (self.sigma * self.sigma);
        if self.alpha == 0.0 {
            return fit;
        }
        fit + self.alpha * self.polar_factor(x)[i]
    }

    fn gradient(&self, x: &[f64], out: &mut [f64]) {
        let s2 = self.sigma * self.sigma;
        let polar = if self.alpha > 0.0 {
            self.polar_factor(x)
        } else {
            vec![0.0; x.len()]
        };
        for (i, o) in out.iter_mut().enumerate() {
            *o = (x[i] - self.y[i]) / s2 + self.alpha * polar[i];
        }
    }

    fn is_kink(&self, _i: usize, x: &[f64]) -> bool {
        if self.alpha == 0.0 {
            return false;
        }
        let m = DMatrix::from_row_slice(self.rows, self.cols, x);
        let s = m.singular_values();
        let top = s.max();
        s.min() <= 1e-14 * top.max(f64::MIN_POSITIVE)
    }

    fn split(&self) -> Option<&dyn NonsmoothSplit> {
        (self.alpha > 0.0).then_some(self as &dyn NonsmoothSplit)
    }

    fn hamiltonian_split(&self) -> Option<&dyn HamiltonianSplit> {
        Some(self)
    }

    fn random_point(&self, rng: &mut dyn RngCore) -> Vec<f64> {
        self.y
            .iter()
            .map(|y| {
                let z: f64 = StandardNormal.sample(&mut *rng);
                y + self.sigma * z
            })
            .collect()
    }
}

impl NonsmoothSplit for NuclearNormDenoise {
    fn smooth_potential(&self, x: &[f64]) -> f64 {
        let fit: f64 = x.iter().zip(&self.y).map(|(a, b)| (a - b) * (a - b)).sum();
        fit / (2.0 * self.sigma * self.sigma)
    }

    fn smooth_gradient(&self, x: &[f64], out: &mut [f64]) {
        let s2 = self.sigma * self.sigma;
        for ((o, x), y) in out.iter_mut().zip(x).zip(&self.y) {
            *o = (x - y) / s2;
        }
    }

    fn nonsmooth(&self) -> &ProxKind {
        &self.prox
    }
}

impl HamiltonianSplit for NuclearNormDenoise {
    fn center(&self) -> &[f64] {
        &self.y
    }

    fn sigma(&self) -> f64 {
        self.sigma
    }

    fn residual_potential(&self, x: &[f64]) -> f64 {
        if self.alpha == 0.0 {
            return 0.0;
        }
        match self.residual {
            Residual::Exact => self.alpha * nuclear_norm(x, self.rows, self.cols),
            Residual::Envelope(lambda) => {
                match prox_nuclear_slice(x, self.rows, self.cols, lambda, self.alpha) {
                    Ok(p) => p.objective,
                    Err(_) => f64::NAN,
                }
            }
        }
    }

    fn residual_gradient(&self, x: &[f64], out: &mut [f64]) {
        if self.alpha == 0.0 {
            out.fill(0.0);
            return;
        }
        match self.residual {
            Residual::Exact => {
                for (o, p) in out.iter_mut().zip(self.polar_factor(x)) {
                    *o = self.alpha * p;
                }
            }
            Residual::Envelope(lambda) => {
                match prox_nuclear_slice(x, self.rows, self.cols, lambda, self.alpha) {
                    Ok(p) => {
                        for ((o, x), p) in out.iter_mut().zip(x).zip(&p.point) {
                            *o = (x - p) / lambda;
                        }
                    }
                    Err(_) => out.fill(f64::NAN),
                }
            }
        }
    }

    /// `alpha sqrt(min(rows, cols))` times the largest speed reachable at
    /// fixed Gaussian energy.
    fn residual_rate_bound(&self, x: &[f64], v: &[f64]) -> Option<f64> {
        let s2 = self.sigma * self.sigma;
        let energy: f64 = x
            .iter()
            .zip(&self.y)
            .map(|(a, b)| (a - b) * (a - b) / s2)
            .sum::<f64>()
            + v.iter().map(|v| v * v).sum::<f64>();
        Some(self.alpha * self.min_dim().sqrt() * energy.sqrt())
    }
}
