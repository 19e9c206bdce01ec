use rand::RngCore;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{invalid, Result};
use crate::pdmp::RateProfile;
use crate::prox::{tv_aniso, ProxKind, DEFAULT_TV_MAX_ITER, DEFAULT_TV_TOL};
use crate::target::{Factor, FactorGraph, NonsmoothSplit, TargetModel};

pub const DEFAULT_DEBLUR_SIGMA: f64 = 0.47;
pub const DEFAULT_DEBLUR_ALPHA: f64 = 0.03;
pub const BLUR_WIDTH: usize = 5;

/// Row-major sparse operator with one row per output pixel.
#[derive(Debug, Clone)]
pub struct SparseRows {
    rows: Vec<Vec<(usize, f64)>>,
    /// For each input pixel, the output rows it enters with their weights.
    columns: Vec<Vec<(usize, f64)>>,
}

impl SparseRows {
    pub fn row(&self, p: usize) -> &[(usize, f64)] {
        &self.rows[p]
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        self.rows.iter().map(|r| dot(r, x)).collect()
    }

    pub fn apply_transpose(&self, r: &[f64]) -> Vec<f64> {
        self.columns.iter().map(|c| dot(c, r)).collect()
    }
}

fn dot(row: &[(usize, f64)], x: &[f64]) -> f64 {
    row.iter().map(|(j, w)| w * x[*j]).sum()
}

/// Index of `i` after symmetric extension of `0..n` (edge sample repeated).
fn reflect(i: isize, n: usize) -> usize {
    let n = n as isize;
    let period = 2 * n;
    let m = i.rem_euclid(period);
    (if m < n { m } else { period - 1 - m }) as usize
}

/// Uniform `width x width` blur with symmetric boundary handling.
pub fn uniform_blur(rows: usize, cols: usize, width: usize) -> SparseRows {
    let half = (width / 2) as isize;
    let weight = 1.0 / (width * width) as f64;
    let mut out = Vec::with_capacity(rows * cols);
    for i in 0..rows as isize {
        for j in 0..cols as isize {
            let mut row: Vec<(usize, f64)> = Vec::with_capacity(width * width);
            for di in -half..=half {
                for dj in -half..=half {
                    let q = reflect(i + di, rows) * cols + reflect(j + dj, cols);
                    match row.iter_mut().find(|(k, _)| *k == q) {
                        Some(entry) => entry.1 += weight,
                        None => row.push((q, weight)),
                    }
                }
            }
            row.sort_unstable_by_key(|(k, _)| *k);
            out.push(row);
        }
    }
    let mut columns = vec![Vec::new(); rows * cols];
    for (p, row) in out.iter().enumerate() {
        for &(q, w) in row {
            columns[q].push((p, w));
        }
    }
    SparseRows { rows: out, columns }
}

/// Posterior `exp(-||Hx - y||^2 / (2 sigma^2) - alpha TV(x))` for a
/// blurred, noisy image.
///
/// Factors are one per output pixel (its 5x5 patch) followed by one per
/// pair of adjacent pixels.
#[derive(Debug, Clone)]
pub struct TvDeblur {
    y: Vec<f64>,
    rows: usize,
    cols: usize,
    sigma: f64,
    alpha: f64,
    blur: SparseRows,
    edges: Vec<(usize, usize)>,
    factors: Vec<Factor>,
    prox: ProxKind,
}

pub fn build_tv_deblur(y: Vec<f64>, size: (usize, usize), sigma: f64, alpha: f64) -> Result<TvDeblur> {
    let (rows, cols) = size;
    if rows < 8 || cols < 8 {
        return invalid(format!("image must be at least 8x8, got {rows}x{cols}"));
    }
    if y.len() != rows * cols {
        return invalid(format!("expected {} pixels, got {}", rows * cols, y.len()));
    }
    if !(sigma > 0.0 && sigma.is_finite()) || !(alpha > 0.0 && alpha.is_finite()) {
        return invalid("deblurring needs sigma > 0 and alpha > 0");
    }
    if y.iter().any(|v| !v.is_finite()) {
        return invalid("observed image must be finite");
    }
    let blur = uniform_blur(rows, cols, BLUR_WIDTH);
    let mut edges = Vec::with_capacity(2 * rows * cols);
    for i in 0..rows {
        for j in 0..cols {
            let p = i * cols + j;
            if i + 1 < rows {
                edges.push((p, p + cols));
            }
            if j + 1 < cols {
                edges.push((p, p + 1));
            }
        }
    }
    let mut factors: Vec<Factor> = (0..blur.len())
        .map(|p| Factor {
            coords: blur.row(p).iter().map(|(q, _)| *q).collect(),
            bound: None,
        })
        .collect();
    factors.extend(edges.iter().map(|&(p, q)| Factor {
        coords: vec![p, q],
        bound: None,
    }));
    Ok(TvDeblur {
        y,
        rows,
        cols,
        sigma,
        alpha,
        blur,
        edges,
        factors,
        prox: ProxKind::Tv2d {
            alpha,
            rows,
            cols,
            tol: DEFAULT_TV_TOL,
            max_iter: DEFAULT_TV_MAX_ITER,
        },
    })
}

impl TvDeblur {
    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn observation(&self) -> &[f64] {
        &self.y
    }

    pub fn blur(&self) -> &SparseRows {
        &self.blur
    }

    /// Replaces the tolerance and sweep cap of the attached TV prox.
    pub fn with_prox_accuracy(mut self, tol: f64, max_iter: usize) -> Result<Self> {
        if !(tol > 0.0) || max_iter == 0 {
            return invalid("prox tolerance and sweep cap must be positive");
        }
        self.prox = ProxKind::Tv2d {
            alpha: self.alpha,
            rows: self.rows,
            cols: self.cols,
            tol,
            max_iter,
        };
        Ok(self)
    }

    fn n_blur(&self) -> usize {
        self.blur.len()
    }

    fn likelihood(&self, x: &[f64]) -> f64 {
        let s2 = self.sigma * self.sigma;
        (0..self.n_blur())
            .map(|p| {
                let r = dot(self.blur.row(p), x) - self.y[p];
                r * r
            })
            .sum::<f64>()
            / (2.0 * s2)
    }

    fn likelihood_partial(&self, i: usize, x: &[f64]) -> f64 {
        let s2 = self.sigma * self.sigma;
        self.blur.columns[i]
            .iter()
            .map(|&(p, w)| w * (dot(self.blur.row(p), x) - self.y[p]))
            .sum::<f64>()
            / s2
    }

    fn neighbours(&self, i: usize) -> impl Iterator<Item = usize> + '_ {
        let (r, c) = (i / self.cols, i % self.cols);
        let up = (r > 0).then(|| i - self.cols);
        let down = (r + 1 < self.rows).then(|| i + self.cols);
        let left = (c > 0).then(|| i - 1);
        let right = (c + 1 < self.cols).then(|| i + 1);
        [up, down, left, right].into_iter().flatten()
    }
}

impl TargetModel for TvDeblur {
    fn dim(&self) -> usize {
        self.rows * self.cols
    }

    fn potential(&self, x: &[f64]) -> f64 {
        self.likelihood(x) + self.alpha * tv_aniso(x, self.rows, self.cols)
    }

    fn partial(&self, i: usize, x: &[f64]) -> f64 {
        let tv: f64 = self
            .neighbours(i)
            .map(|q| {
                let d = x[i] - x[q];
                if d == 0.0 {
                    0.0
                } else {
                    d.signum()
                }
            })
            .sum();
        self.likelihood_partial(i, x) + self.alpha * tv
    }

    fn gradient(&self, x: &[f64], out: &mut [f64]) {
        self.smooth_gradient(x, out);
        for &(p, q) in &self.edges {
            let d = x[p] - x[q];
            if d != 0.0 {
                let s = self.alpha * d.signum();
                out[p] += s;
                out[q] -= s;
            }
        }
    }

    fn is_kink(&self, i: usize, x: &[f64]) -> bool {
        self.neighbours(i).any(|q| x[q] == x[i])
    }

    fn split(&self) -> Option<&dyn NonsmoothSplit> {
        Some(self)
    }

    fn factor_graph(&self) -> Option<&dyn FactorGraph> {
        Some(self)
    }

    fn random_point(&self, rng: &mut dyn RngCore) -> Vec<f64> {
        self.y
            .iter()
            .map(|y| {
                let z: f64 = StandardNormal.sample(&mut *rng);
                y + z
            })
            .collect()
    }
}

impl NonsmoothSplit for TvDeblur {
    fn smooth_potential(&self, x: &[f64]) -> f64 {
        self.likelihood(x)
    }

    fn smooth_gradient(&self, x: &[f64], out: &mut [f64]) {
        let s2 = self.sigma * self.sigma;
        let mut r = self.blur.apply(x);
        for (r, y) in r.iter_mut().zip(&self.y) {
            *r = (*r - y) / s2;
        }
        out.copy_from_slice(&self.blur.apply_transpose(&r));
    }

    fn nonsmooth(&self) -> &ProxKind {
        &self.prox
    }
}

impl FactorGraph for TvDeblur {
    fn factors(&self) -> &[Factor] {
        &self.factors
    }

    fn factor_potential(&self, k: usize, x: &[f64]) -> f64 {
        if k < self.n_blur() {
            let r = dot(self.blur.row(k), x) - self.y[k];
            r * r / (2.0 * self.sigma * self.sigma)
        } else {
            let (p, q) = self.edges[k - self.n_blur()];
            self.alpha * (x[p] - x[q]).abs()
        }
    }

    fn factor_gradient(&self, k: usize, x: &[f64], out: &mut [f64]) {
        if k < self.n_blur() {
            let row = self.blur.row(k);
            let r = (dot(row, x) - self.y[k]) / (self.sigma * self.sigma);
            for (o, (_, w)) in out.iter_mut().zip(row) {
                *o = r * w;
            }
        } else {
            let (p, q) = self.edges[k - self.n_blur()];
            let d = x[p] - x[q];
            let s = if d == 0.0 { 0.0 } else { self.alpha * d.signum() };
            out[0] = s;
            out[1] = -s;
        }
    }

    fn factor_rate_profile(&self, k: usize, x: &[f64], v: &[f64]) -> Option<RateProfile> {
        if k < self.n_blur() {
            let row = self.blur.row(k);
            let s2 = self.sigma * self.sigma;
            let hv = dot(row, v);
            let r = dot(row, x) - self.y[k];
            Some(RateProfile::Linear {
                intercept: r * hv / s2,
                slope: hv * hv / s2,
            })
        } else {
            let (p, q) = self.edges[k - self.n_blur()];
            let (d, dv) = (x[p] - x[q], v[p] - v[q]);
            if dv == 0.0 {
                return Some(RateProfile::PiecewiseConstant { delay: 0.0, rate: 0.0 });
            }
            let delay = if d * dv < 0.0 { d.abs() / dv.abs() } else { 0.0 };
            Some(RateProfile::PiecewiseConstant {
                delay,
                rate: self.alpha * dv.abs(),
            })
        }
    }
}

/// A piecewise-constant scene: background, a bright square, a dark disc and
/// a mid-grey bar, with intensities in `[0, 255]`.
pub fn test_scene(rows: usize, cols: usize) -> Vec<f64> {
    let mut img = vec![60.0; rows * cols];
    let (fr, fc) = (rows as f64, cols as f64);
    for i in 0..rows {
        for j in 0..cols {
            let (u, v) = ((i as f64 + 0.5) / fr, (j as f64 + 0.5) / fc);
            let p = i * cols + j;
            if (0.15..0.5).contains(&u) && (0.15..0.5).contains(&v) {
                img[p] = 220.0;
            }
            if (u - 0.68).powi(2) + (v - 0.65).powi(2) < 0.2f64.powi(2) {
                img[p] = 10.0;
            }
            if (0.72..0.85).contains(&u) && (0.1..0.4).contains(&v) {
                img[p] = 140.0;
            }
        }
    }
    img
}

/// Blurs `x` with the uniform kernel and adds `N(0, sigma^2)` noise.
pub fn blur_and_noise<R: rand::Rng + ?Sized>(
    x: &[f64],
    rows: usize,
    cols: usize,
    sigma: f64,
    rng: &mut R,
) -> Vec<f64> {
    uniform_blur(rows, cols, BLUR_WIDTH)
        .apply(x)
        .into_iter()
        .map(|b| {
            let z: f64 = StandardNormal.sample(rng);
            b + sigma * z
        })
        .collect()
}
