//! Proximal operator of a generic convex function from value and
//! subgradient oracles.
//!
//! Each outer iteration adds the linearisation of `g` at the current iterate
//! to a cutting-plane model and minimises `model(u) + ||x - u||^2 / (2 lambda)`
//! exactly through its dual over the simplex of cut weights. The quadratic
//! term is fixed, so the iterates converge to the true prox; for polyhedral
//! `g` the model becomes exact after finitely many cuts.

use super::{half_sq_dist_over, ProxResult};
use crate::error::{invalid, Result};

pub const DEFAULT_NUMERIC_TOL: f64 = 1e-10;
pub const DEFAULT_NUMERIC_MAX_ITER: usize = 10_000;
const MAX_CUTS: usize = 64;
const INNER_MAX_ITER: usize = 20_000;

/// A proper convex function known through oracles.
///
/// Functions with a restricted domain (indicators, barriers) describe it
/// through [`ConvexFunction::project_domain`]; `value` and `subgradient` are
/// only called on points inside the domain.
pub trait ConvexFunction: Send + Sync {
    fn value(&self, u: &[f64]) -> f64;

    /// Writes any element of the subdifferential at `u` into `out`.
    fn subgradient(&self, u: &[f64], out: &mut [f64]);

    /// Euclidean projection onto the domain; the identity for finite `g`.
    fn project_domain(&self, _u: &mut [f64]) {}
}

impl<F: ConvexFunction + ?Sized> ConvexFunction for &F {
    fn value(&self, u: &[f64]) -> f64 {
        (**self).value(u)
    }
    fn subgradient(&self, u: &[f64], out: &mut [f64]) {
        (**self).subgradient(u, out)
    }
    fn project_domain(&self, u: &mut [f64]) {
        (**self).project_domain(u)
    }
}

/// Indicator of the box `[lo, hi]^n`.
#[derive(Debug, Clone, Copy)]
pub struct BoxIndicator {
    pub lo: f64,
    pub hi: f64,
}

impl ConvexFunction for BoxIndicator {
    fn value(&self, _u: &[f64]) -> f64 {
        0.0
    }
    fn subgradient(&self, _u: &[f64], out: &mut [f64]) {
        out.fill(0.0);
    }
    fn project_domain(&self, u: &mut [f64]) {
        for v in u {
            *v = v.clamp(self.lo, self.hi);
        }
    }
}

struct Cut {
    offset: f64,
    slope: Vec<f64>,
}

impl Cut {
    fn eval(&self, u: &[f64]) -> f64 {
        self.offset + dot(&self.slope, u)
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Euclidean projection onto the probability simplex.
fn project_simplex(w: &mut [f64]) {
    let mut sorted: Vec<f64> = w.to_vec();
    sorted.sort_by(|a, b| b.total_cmp(a));
    let mut cumsum = 0.0;
    let mut shift = 0.0;
    for (k, s) in sorted.iter().enumerate() {
        cumsum += s;
        let candidate = (cumsum - 1.0) / (k + 1) as f64;
        if s - candidate > 0.0 {
            shift = candidate;
        }
    }
    for v in w.iter_mut() {
        *v = (*v - shift).max(0.0);
    }
}

struct Master<'a, F: ConvexFunction + ?Sized> {
    g: &'a F,
    x: &'a [f64],
    lambda: f64,
}

impl<F: ConvexFunction + ?Sized> Master<'_, F> {
    /// Primal point induced by cut weights `w`.
    fn primal(&self, cuts: &[Cut], w: &[f64], out: &mut [f64]) {
        out.copy_from_slice(self.x);
        for (cut, wj) in cuts.iter().zip(w) {
            if *wj != 0.0 {
                for (o, s) in out.iter_mut().zip(&cut.slope) {
                    *o -= self.lambda * wj * s;
                }
            }
        }
        self.g.project_domain(out);
    }

    fn dual_value(&self, cuts: &[Cut], w: &[f64], u: &[f64]) -> f64 {
        let model: f64 = cuts.iter().zip(w).map(|(c, wj)| wj * c.eval(u)).sum();
        model + half_sq_dist_over(self.x, u, self.lambda)
    }

    /// Maximises the concave dual over the simplex by accelerated projected
    /// gradient; returns the optimal weights' primal point and dual value.
    fn solve(&self, cuts: &[Cut], w: &mut Vec<f64>) -> (Vec<f64>, f64) {
        let m = cuts.len();
        w.resize(m, 0.0);
        if w.iter().sum::<f64>() <= 0.0 {
            w.iter_mut().for_each(|v| *v = 0.0);
            w[m - 1] = 1.0;
        }
        project_simplex(w);
        let mut lip = 0.0f64;
        for c in cuts {
            lip += dot(&c.slope, &c.slope);
        }
        let lip = (self.lambda * lip).max(1e-300);
        let step = 1.0 / lip;
        let n = self.x.len();
        let mut u = vec![0.0; n];
        let mut y = w.clone();
        let mut w_prev = w.clone();
        let mut t = 1.0f64;
        for _ in 0..INNER_MAX_ITER {
            self.primal(cuts, &y, &mut u);
            let mut next: Vec<f64> = y
                .iter()
                .zip(cuts)
                .map(|(yj, c)| yj + step * c.eval(&u))
                .collect();
            project_simplex(&mut next);
            let change = next
                .iter()
                .zip(w.iter())
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max);
            w_prev.copy_from_slice(w);
            w.copy_from_slice(&next);
            let t_next = 0.5 * (1.0 + (1.0 + 4.0 * t * t).sqrt());
            let momentum = (t - 1.0) / t_next;
            for j in 0..m {
                y[j] = w[j] + momentum * (w[j] - w_prev[j]);
            }
            project_simplex(&mut y);
            t = t_next;
            if change < 1e-15 {
                break;
            }
        }
        self.primal(cuts, w, &mut u);
        let value = self.dual_value(cuts, w, &u);
        (u, value)
    }
}

/// Prox of `g` by cutting planes, capped at the default 10 000 iterations.
pub fn prox_numeric<F: ConvexFunction + ?Sized>(
    g: &F,
    x: &[f64],
    lambda: f64,
    tol: f64,
) -> Result<ProxResult> {
    prox_numeric_with_cap(g, x, lambda, tol, DEFAULT_NUMERIC_MAX_ITER)
}

/// Stops when successive iterates move less than `tol` (sup norm) or the
/// certified optimality gap vanishes; `converged = false` at the cap.
pub fn prox_numeric_with_cap<F: ConvexFunction + ?Sized>(
    g: &F,
    x: &[f64],
    lambda: f64,
    tol: f64,
    max_iter: usize,
) -> Result<ProxResult> {
    if !(lambda > 0.0) || !(tol > 0.0) {
        return invalid("numeric prox needs positive lambda and tol");
    }
    let n = x.len();
    let master = Master { g, x, lambda };
    let mut u = x.to_vec();
    g.project_domain(&mut u);
    let mut cuts: Vec<Cut> = Vec::new();
    let mut weights: Vec<f64> = Vec::new();
    let mut sub = vec![0.0; n];
    let mut best = (f64::INFINITY, u.clone());
    let mut iterations = 0;
    let mut converged = false;
    while iterations < max_iter {
        iterations += 1;
        let gu = g.value(&u);
        let objective = gu + half_sq_dist_over(x, &u, lambda);
        if objective < best.0 {
            best = (objective, u.clone());
        }
        g.subgradient(&u, &mut sub);
        cuts.push(Cut {
            offset: gu - dot(&sub, &u),
            slope: sub.clone(),
        });
        weights.push(0.0);
        if cuts.len() > MAX_CUTS {
            // fold the current aggregate into a single cut and drop inactive ones
            let mut agg = Cut {
                offset: 0.0,
                slope: vec![0.0; n],
            };
            for (c, wj) in cuts.iter().zip(&weights) {
                agg.offset += wj * c.offset;
                for (a, s) in agg.slope.iter_mut().zip(&c.slope) {
                    *a += wj * s;
                }
            }
            let newest = cuts.pop().expect("just pushed");
            cuts = vec![agg, newest];
            weights = vec![1.0, 0.0];
        }
        let (next, lower) = master.solve(&cuts, &mut weights);
        let step = next
            .iter()
            .zip(&u)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        let upper = best.0;
        u = next;
        let gap = upper - lower;
        if step < tol || gap <= 1e-15 * upper.abs().max(1.0) {
            let gu = g.value(&u);
            let objective = gu + half_sq_dist_over(x, &u, lambda);
            if objective < best.0 {
                best = (objective, u.clone());
            }
            converged = true;
            break;
        }
    }
    Ok(ProxResult {
        point: best.1,
        objective: best.0,
        iterations,
        converged,
    })
}
