use std::f64::consts::{PI, TAU};

use rand::{Rng, RngCore};
use rand_distr::{Distribution, Exp};

use crate::error::{invalid, Result};
use crate::target::{BoundStrategy, Interval, TargetModel, WindowBound};

/// Number of parameters: `(mu1, mu2, lambda1, lambda2, kappa1, kappa2, rho)`.
pub const CIRCULAR_DIM: usize = 7;

const RHO_PRIOR: f64 = 99.0;

/// Two-component mixture of wrapped asymmetric Laplace laws on the circle.
///
/// The locations are carried unwrapped; the potential is `2 pi`-periodic in
/// them and [`TargetModel::canonicalize`] maps them back to `[0, 2 pi)`.
#[derive(Debug, Clone)]
pub struct WrappedLaplaceMixture {
    data: Vec<f64>,
    domain: [Interval; CIRCULAR_DIM],
}

pub fn build_wrapped_mixture(data: Vec<f64>) -> Result<WrappedLaplaceMixture> {
    if data.is_empty() {
        return invalid("the mixture needs at least one angle");
    }
    if data.iter().any(|y| !(0.0..TAU).contains(y)) {
        return invalid("angles must lie in [0, 2 pi)");
    }
    let pos = Interval::positive();
    Ok(WrappedLaplaceMixture {
        data,
        domain: [
            Interval::REAL_LINE,
            Interval::REAL_LINE,
            pos,
            pos,
            pos,
            pos,
            Interval { lo: 0.0, hi: 1.0 },
        ],
    })
}

/// Shift of `y` behind `mu`, in `(0, 2 pi]`.
pub fn wrapped_shift(y: f64, mu: f64) -> f64 {
    let t = (y - mu).rem_euclid(TAU);
    if t == 0.0 {
        TAU
    } else {
        t
    }
}

/// `ln(a / (1 - exp(-2 pi a)))`, continuous at `a = 0`.
fn ln_wrap_norm(a: f64) -> f64 {
    let x = TAU * a;
    if x < 1e-6 {
        (1.0 + x / 2.0 + x * x / 12.0).ln() - TAU.ln()
    } else {
        a.ln() - (-(-x).exp_m1()).ln()
    }
}

/// `d/da ln(a / (1 - exp(-2 pi a)))`, which lies in `(0, pi]`.
fn wrap_score(a: f64) -> f64 {
    if a < 1e-4 {
        PI - PI * PI * a / 3.0 + TAU.powi(4) * a.powi(3) / 720.0
    } else {
        1.0 / a - TAU / (TAU * a).exp_m1()
    }
}

fn log_add(a: f64, b: f64) -> f64 {
    let m = a.max(b);
    if m == f64::NEG_INFINITY {
        return m;
    }
    m + ((a - m).exp() + (b - m).exp()).ln()
}

/// Quantities of one component that do not depend on the data.
#[derive(Clone, Copy)]
struct Shape {
    lambda: f64,
    kappa: f64,
    a: f64,
    b: f64,
    /// Log-weights of the two branches, normalizers included.
    ln_right: f64,
    ln_left: f64,
    score_a: f64,
    score_b: f64,
}

impl Shape {
    fn new(lambda: f64, kappa: f64) -> Self {
        let a = lambda * kappa;
        let b = lambda / kappa;
        let ln_w = -(kappa * kappa).ln_1p();
        Shape {
            lambda,
            kappa,
            a,
            b,
            ln_right: ln_w + ln_wrap_norm(a),
            ln_left: 2.0 * kappa.ln() + ln_w + ln_wrap_norm(b) - b * TAU,
            score_a: wrap_score(a),
            score_b: wrap_score(b),
        }
    }

    fn at(&self, theta: f64) -> Component {
        let le = self.ln_right - self.a * theta;
        let lf = self.ln_left + self.b * theta;
        let ln_l = log_add(le, lf);
        Component {
            ln_l,
            right: (le - ln_l).exp(),
            theta,
        }
    }
}

/// One wrapped Laplace component at a shift `theta`.
struct Component {
    ln_l: f64,
    /// Share of the right-hand (decaying) branch in `L`.
    right: f64,
    theta: f64,
}

impl Component {
    /// `d ln L / d mu`; the shift decreases as `mu` grows.
    fn d_mu(&self, s: &Shape) -> f64 {
        s.a * self.right - s.b * (1.0 - self.right)
    }

    fn d_a(&self, s: &Shape) -> f64 {
        s.score_a - self.theta
    }

    fn d_b(&self, s: &Shape) -> f64 {
        s.score_b + self.theta - TAU
    }

    fn d_lambda(&self, s: &Shape) -> f64 {
        self.right * s.kappa * self.d_a(s) + (1.0 - self.right) * self.d_b(s) / s.kappa
    }

    fn d_kappa(&self, s: &Shape) -> f64 {
        let (lambda, kappa) = (s.lambda, s.kappa);
        let q = 1.0 + kappa * kappa;
        let weight = -2.0 * kappa / q * self.right + 2.0 / (kappa * q) * (1.0 - self.right);
        weight + self.right * lambda * self.d_a(s)
            - (1.0 - self.right) * lambda / (kappa * kappa) * self.d_b(s)
    }
}

/// Density of one wrapped Laplace component at the angle `y`.
pub fn wrapped_laplace_density(y: f64, mu: f64, lambda: f64, kappa: f64) -> f64 {
    Shape::new(lambda, kappa).at(wrapped_shift(y, mu)).ln_l.exp()
}

fn in_support(x: &[f64]) -> bool {
    x[2] >= 0.0 && x[3] >= 0.0 && x[4] > 0.0 && x[5] > 0.0 && x[6] > 0.0 && x[6] < 1.0
}

impl WrappedLaplaceMixture {
    pub fn data(&self) -> &[f64] {
        &self.data
    }

    fn prior_potential(x: &[f64]) -> f64 {
        x[2] + x[3] + (2.0 * x[4] - x[4].ln()) + (2.0 * x[5] - x[5].ln())
            - RHO_PRIOR * (x[6].ln() + (-x[6]).ln_1p())
    }

    fn prior_partial(i: usize, x: &[f64]) -> f64 {
        match i {
            2 | 3 => 1.0,
            4 | 5 => 2.0 - 1.0 / x[i],
            6 => -RHO_PRIOR / x[6] + RHO_PRIOR / (1.0 - x[6]),
            _ => 0.0,
        }
    }

    /// Supremum of `|dU/dx_i|` over the box swept by `x + v s`, `s <= h`.
    ///
    /// Each observation contributes `r A + (1 - r) B`, where `r` is the share
    /// of the decaying branch. The shift terms are bounded on the range the
    /// shift actually sweeps; they are also damped by `r` (resp. `1 - r`),
    /// which decays exponentially in the shift, so they stay of order
    /// `1 / (a + b)` even when the whole circle is swept.
    fn gradient_box_bound(&self, x: &[f64], v: &[f64], h: f64) -> [f64; CIRCULAR_DIM] {
        let lo = |i: usize| x[i] + (v[i] * h).min(0.0);
        let hi = |i: usize| x[i] + (v[i] * h).max(0.0);
        let n = self.data.len() as f64;
        let mut out = [0.0; CIRCULAR_DIM];
        for k in 0..2 {
            let (l_lo, l_hi) = (lo(2 + k).max(0.0), hi(2 + k));
            let (k_lo, k_hi) = (lo(4 + k), hi(4 + k));
            let (a_lo, a_hi) = (l_lo * k_lo, l_hi * k_hi);
            let (b_lo, b_hi) = (l_lo / k_hi, l_hi / k_lo);
            let min_sum = if (k_lo..=k_hi).contains(&1.0) {
                2.0
            } else {
                (k_lo + 1.0 / k_lo).min(k_hi + 1.0 / k_hi)
            };
            let rate_lo = l_lo * min_sum;
            // sup_u u min(1, C e^{-(a+b)u}) <= max(ln C, 1) / (a+b)
            let damped = |ln_c: f64| {
                if rate_lo > 0.0 {
                    TAU.min(ln_c.max(1.0) / rate_lo)
                } else {
                    TAU
                }
            };
            let ln_c = 2.0 * k_hi.ln() + TAU * a_hi + (TAU * b_hi).ln_1p();
            let ln_d = -2.0 * k_lo.ln() + TAU * b_hi + (TAU * a_hi).ln_1p();
            // g is decreasing
            let (ga_lo, ga_hi) = (wrap_score(a_hi), wrap_score(a_lo));
            let (gb_lo, gb_hi) = (wrap_score(b_hi), wrap_score(b_lo));
            let right_cap = ga_hi + damped(ln_d);
            let left_cap = gb_hi + damped(ln_c);
            let corners = |g_lo: f64, g_hi: f64, t_lo: f64, t_hi: f64| {
                (g_hi - t_lo).abs().max((g_lo - t_hi).abs())
            };

            let shift = v[k] * h;
            let weight = 2.0 / (k_lo * (1.0 + k_lo * k_lo));
            let (mut d_mu, mut d_right, mut d_left, mut d_weight) = (0.0, 0.0, 0.0, 0.0);
            for &y in &self.data {
                let t0 = wrapped_shift(y, x[k]);
                let (mut t_lo, mut t_hi) = (t0 - shift.max(0.0), t0 - shift.min(0.0));
                if t_lo <= 0.0 || t_hi > TAU {
                    // the kink is crossed
                    (t_lo, t_hi) = (0.0, TAU);
                }
                // branch shares: r <= D e^{-(a+b) theta}, 1 - r <= C e^{-(a+b) u}
                let r_sup = (ln_d - rate_lo * t_lo).exp().min(1.0);
                let l_sup = (ln_c - rate_lo * (TAU - t_hi)).exp().min(1.0);
                d_mu += (r_sup * a_hi).max(l_sup * b_hi);
                d_right += right_cap.min(r_sup * corners(ga_lo, ga_hi, t_lo, t_hi));
                d_left += left_cap.min(l_sup * corners(gb_lo, gb_hi, TAU - t_hi, TAU - t_lo));
                d_weight += r_sup + l_sup * weight;
            }

            out[k] = d_mu;
            out[2 + k] = k_hi * d_right + d_left / k_lo + 1.0;
            out[4 + k] = d_weight + l_hi * d_right + l_hi / (k_lo * k_lo) * d_left
                + (2.0 - 1.0 / k_lo).abs().max((2.0 - 1.0 / k_hi).abs());
        }
        let (r_lo, r_hi) = (lo(6), hi(6));
        let f = |r: f64| -RHO_PRIOR / r + RHO_PRIOR / (1.0 - r);
        out[6] = n * (1.0 / r_lo).max(1.0 / (1.0 - r_hi)) + f(r_lo).abs().max(f(r_hi).abs());
        out
    }

    /// Longest window over which `kappa` and `rho` keep at least half their
    /// distance to the boundary and the box stays narrow: `kappa` at most
    /// doubles and `lambda` grows by at most `lambda + 1/2`.
    fn safe_horizon(x: &[f64], v: &[f64], theta: f64) -> f64 {
        let mut h = theta;
        for i in [2, 3, 4, 5, 6] {
            let room = match (i, v[i] < 0.0) {
                (2 | 3, true) => continue,
                (2 | 3, false) => x[i] + 0.5,
                (4 | 5, true) => 0.5 * x[i],
                (4 | 5, false) => x[i],
                (_, true) => 0.5 * x[i],
                (_, false) => 0.5 * (1.0 - x[i]),
            };
            if v[i] != 0.0 {
                h = h.min(room / v[i].abs());
            }
        }
        h
    }

    /// Constant-over-window bound on the bouncy particle rate `<v, grad U>^+`.
    pub fn bps_bound(&self, lookahead: f64) -> BoundStrategy {
        let model = self.clone();
        BoundStrategy::linear(move |x, v, theta| {
            let h = Self::safe_horizon(x, v, theta);
            let b = model.gradient_box_bound(x, v, h);
            WindowBound {
                intercept: b.iter().zip(v).map(|(b, v)| b * v.abs()).sum(),
                slope: 0.0,
                horizon: h,
            }
        })
        .with_lookahead(lookahead)
    }

    /// Per-coordinate Zig-Zag bounds of the same kind.
    pub fn zz_bounds(&self, lookahead: f64) -> Vec<BoundStrategy> {
        (0..CIRCULAR_DIM)
            .map(|i| {
                let model = self.clone();
                BoundStrategy::linear(move |x, v, theta| {
                    let h = Self::safe_horizon(x, v, theta);
                    WindowBound {
                        intercept: model.gradient_box_bound(x, v, h)[i] * v[i].abs(),
                        slope: 0.0,
                        horizon: h,
                    }
                })
                .with_lookahead(lookahead)
            })
            .collect()
    }
}

impl TargetModel for WrappedLaplaceMixture {
    fn dim(&self) -> usize {
        CIRCULAR_DIM
    }

    fn potential(&self, x: &[f64]) -> f64 {
        if !in_support(x) {
            return f64::INFINITY;
        }
        let (s1, s2) = (Shape::new(x[2], x[4]), Shape::new(x[3], x[5]));
        let (ln_r1, ln_r2) = (x[6].ln(), (-x[6]).ln_1p());
        let lik: f64 = self
            .data
            .iter()
            .map(|&y| {
                let c1 = s1.at(wrapped_shift(y, x[0]));
                let c2 = s2.at(wrapped_shift(y, x[1]));
                -log_add(ln_r1 + c1.ln_l, ln_r2 + c2.ln_l)
            })
            .sum();
        lik + Self::prior_potential(x)
    }

    fn partial(&self, i: usize, x: &[f64]) -> f64 {
        let mut g = [0.0; CIRCULAR_DIM];
        self.gradient(x, &mut g);
        g[i]
    }

    fn gradient(&self, x: &[f64], out: &mut [f64]) {
        if !in_support(x) {
            out.fill(f64::NAN);
            return;
        }
        for (i, o) in out.iter_mut().enumerate() {
            *o = Self::prior_partial(i, x);
        }
        let (s1, s2) = (Shape::new(x[2], x[4]), Shape::new(x[3], x[5]));
        let (ln_r1, ln_r2) = (x[6].ln(), (-x[6]).ln_1p());
        for &y in &self.data {
            let c1 = s1.at(wrapped_shift(y, x[0]));
            let c2 = s2.at(wrapped_shift(y, x[1]));
            let l1 = ln_r1 + c1.ln_l;
            let l2 = ln_r2 + c2.ln_l;
            let r1 = (l1 - log_add(l1, l2)).exp();
            let r2 = 1.0 - r1;
            out[0] -= r1 * c1.d_mu(&s1);
            out[1] -= r2 * c2.d_mu(&s2);
            out[2] -= r1 * c1.d_lambda(&s1);
            out[3] -= r2 * c2.d_lambda(&s2);
            out[4] -= r1 * c1.d_kappa(&s1);
            out[5] -= r2 * c2.d_kappa(&s2);
            out[6] -= r1 / x[6] - r2 / (1.0 - x[6]);
        }
    }

    fn is_kink(&self, i: usize, x: &[f64]) -> bool {
        i < 2 && self.data.iter().any(|&y| (y - x[i]).rem_euclid(TAU) == 0.0)
    }

    fn domain(&self) -> Option<&[Interval]> {
        Some(&self.domain)
    }

    fn canonicalize(&self, x: &mut [f64]) {
        for m in &mut x[..2] {
            *m = m.rem_euclid(TAU);
        }
    }

    fn random_point(&self, rng: &mut dyn RngCore) -> Vec<f64> {
        vec![
            rng.random_range(0.0..TAU),
            rng.random_range(0.0..TAU),
            rng.random_range(0.2..5.0),
            rng.random_range(0.2..5.0),
            rng.random_range(0.3..3.0),
            rng.random_range(0.3..3.0),
            rng.random_range(0.1..0.9),
        ]
    }
}

/// Draws `n` angles from the mixture with parameters in model order.
pub fn sample_wrapped_mixture<R: Rng + ?Sized>(
    params: &[f64; CIRCULAR_DIM],
    n: usize,
    rng: &mut R,
) -> Result<Vec<f64>> {
    if !in_support(params) || params[2] <= 0.0 || params[3] <= 0.0 {
        return invalid("mixture parameters lie outside their support");
    }
    let draw = |k: usize, rng: &mut R| -> f64 {
        let (mu, lambda, kappa) = (params[k], params[2 + k], params[4 + k]);
        let w = 1.0 / (1.0 + kappa * kappa);
        let offset = if rng.random::<f64>() < w {
            Exp::new(lambda * kappa).unwrap().sample(rng)
        } else {
            -Exp::new(lambda / kappa).unwrap().sample(rng)
        };
        (mu + offset).rem_euclid(TAU)
    };
    Ok((0..n)
        .map(|_| {
            let k = if rng.random::<f64>() < params[6] { 0 } else { 1 };
            draw(k, rng)
        })
        .collect())
}
