//! Event-time generation for inhomogeneous Poisson clocks: exact inversion
//! of closed-form integrated rates, and thinning against window bounds.

use std::ops::AddAssign;

use rand::Rng;
use rand_distr::{Distribution, Exp1};

use crate::error::{Error, Result};
use crate::target::{BoundKind, BoundStrategy, WindowBound};

/// Rate functions whose integrated rate can be inverted in closed form.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RateProfile {
    /// Zero on `[0, delay)`, then the constant `rate`.
    PiecewiseConstant { delay: f64, rate: f64 },
    /// `max(0, intercept + slope * t)`.
    Linear { intercept: f64, slope: f64 },
}

impl RateProfile {
    pub fn rate_at(&self, t: f64) -> f64 {
        match *self {
            RateProfile::PiecewiseConstant { delay, rate } => {
                if t >= delay {
                    rate.max(0.0)
                } else {
                    0.0
                }
            }
            RateProfile::Linear { intercept, slope } => (intercept + slope * t).max(0.0),
        }
    }

    /// Time at which the integrated rate reaches `level`; infinite when it
    /// never does.
    pub fn invert(&self, level: f64) -> f64 {
        match *self {
            RateProfile::PiecewiseConstant { delay, rate } => {
                if rate > 0.0 {
                    delay.max(0.0) + level / rate
                } else {
                    f64::INFINITY
                }
            }
            RateProfile::Linear { intercept: a, slope: b } => invert_linear(a, b, level),
        }
    }
}

fn invert_linear(a: f64, b: f64, level: f64) -> f64 {
    if b > 0.0 {
        if a >= 0.0 {
            // positive root of b t^2 / 2 + a t = level, written without cancellation
            2.0 * level / (a + (a * a + 2.0 * b * level).sqrt())
        } else {
            -a / b + (2.0 * level / b).sqrt()
        }
    } else if b == 0.0 {
        if a > 0.0 {
            level / a
        } else {
            f64::INFINITY
        }
    } else {
        // decreasing rate: total mass a^2 / (2|b|) may be exhausted first
        if a <= 0.0 || level >= a * a / (-2.0 * b) {
            f64::INFINITY
        } else {
            2.0 * level / (a + (a * a + 2.0 * b * level).sqrt())
        }
    }
}

/// Exact first event time of a clock with the given rate profile.
pub fn inversion_event<R: Rng + ?Sized>(profile: RateProfile, rng: &mut R) -> f64 {
    let level: f64 = Exp1.sample(rng);
    profile.invert(level)
}

/// Counters describing how efficient the thinning bounds were.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct ThinningStats {
    pub proposals: u64,
    pub accepted: u64,
    pub bound_violations: u64,
    pub lookahead_renewals: u64,
    /// Clocks rescheduled after velocity changes.
    pub clock_redraws: u64,
}

impl AddAssign for ThinningStats {
    fn add_assign(&mut self, rhs: Self) {
        self.proposals += rhs.proposals;
        self.accepted += rhs.accepted;
        self.bound_violations += rhs.bound_violations;
        self.lookahead_renewals += rhs.lookahead_renewals;
        self.clock_redraws += rhs.clock_redraws;
    }
}

impl ThinningStats {
    pub fn acceptance_rate(&self) -> f64 {
        if self.proposals == 0 {
            f64::NAN
        } else {
            self.accepted as f64 / self.proposals as f64
        }
    }
}

/// What the earliest pending time of a [`Clock`] means.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) enum Pending {
    /// An exact event; no acceptance step.
    Exact,
    /// A thinning proposal with the bound value at the proposed time.
    Proposal { bound: f64 },
    /// End of the current look-ahead window.
    Renewal,
    /// Nothing will ever happen on this clock.
    Never,
}

/// Scheduling state of a single Poisson clock in absolute time.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Clock {
    pub time: f64,
    pub pending: Pending,
    window_start: f64,
    window_end: f64,
    intercept: f64,
    slope: f64,
}

impl Default for Clock {
    fn default() -> Self {
        Self {
            time: f64::INFINITY,
            pending: Pending::Never,
            window_start: 0.0,
            window_end: 0.0,
            intercept: 0.0,
            slope: 0.0,
        }
    }
}

impl Clock {
    pub fn schedule_exact<R: Rng + ?Sized>(&mut self, now: f64, profile: RateProfile, rng: &mut R) {
        let dt = inversion_event(profile, rng);
        if dt.is_finite() {
            self.time = now + dt;
            self.pending = Pending::Exact;
        } else {
            self.time = f64::INFINITY;
            self.pending = Pending::Never;
        }
    }

    /// Starts a thinning window at `now` and draws the first proposal.
    pub fn open_window<R: Rng + ?Sized>(
        &mut self,
        now: f64,
        bound: WindowBound,
        safety: f64,
        rng: &mut R,
    ) {
        let scale = 1.0 + safety;
        self.window_start = now;
        self.window_end = now + bound.horizon.max(0.0);
        self.intercept = bound.intercept * scale;
        self.slope = bound.slope * scale;
        self.propose_from(now, rng);
    }

    pub fn bound_at(&self, t: f64) -> f64 {
        (self.intercept + self.slope * (t - self.window_start)).max(0.0)
    }

    /// Next proposal of the current window, drawn from time `from`.
    pub fn propose_from<R: Rng + ?Sized>(&mut self, from: f64, rng: &mut R) {
        let profile = RateProfile::Linear {
            intercept: self.intercept + self.slope * (from - self.window_start),
            slope: self.slope,
        };
        let dt = inversion_event(profile, rng);
        let t = from + dt;
        if t > self.window_end || !t.is_finite() {
            self.time = self.window_end;
            self.pending = Pending::Renewal;
        } else {
            self.time = t;
            self.pending = Pending::Proposal {
                bound: self.bound_at(t),
            };
        }
    }
}

/// Bound for the window starting at the state `(x, v)`.
///
/// `rate_at_end` is only called for [`BoundKind::ConvexEndpoint`] and must
/// return the true rate at the end of a window of length `theta`.
pub(crate) fn window_bound(
    strategy: &BoundStrategy,
    x: &[f64],
    v: &[f64],
    rate_at_end: impl FnOnce(f64) -> f64,
) -> WindowBound {
    let theta = strategy.lookahead;
    match &strategy.kind {
        BoundKind::Constant(c) => WindowBound {
            intercept: *c,
            slope: 0.0,
            horizon: theta,
        },
        BoundKind::LinearInTime(f) => {
            let mut b = f(x, v, theta);
            b.horizon = b.horizon.min(theta);
            b
        }
        BoundKind::ConvexEndpoint => WindowBound {
            intercept: rate_at_end(theta).max(0.0),
            slope: 0.0,
            horizon: theta,
        },
    }
}

/// Decides a thinning proposal; `Err` when the true rate exceeds the bound.
pub(crate) fn accept_proposal<R: Rng + ?Sized>(
    clock: usize,
    time: f64,
    rate: f64,
    bound: f64,
    stats: &mut ThinningStats,
    rng: &mut R,
) -> Result<bool> {
    stats.proposals += 1;
    if rate > bound {
        stats.bound_violations += 1;
        return Err(Error::BoundViolation {
            clock,
            time,
            rate,
            bound,
        });
    }
    let u: f64 = rng.random();
    let accept = u * bound < rate;
    if accept {
        stats.accepted += 1;
    }
    Ok(accept)
}

/// Result of a single-clock thinning run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ThinningOutcome {
    /// Elapsed time to the accepted event, `None` if none before the horizon.
    pub time: Option<f64>,
    pub stats: ThinningStats,
}

/// First event of a Poisson process with rate `rate(t)` by thinning.
///
/// Stand-alone use has no sampler state, so a [`BoundKind::LinearInTime`]
/// callable receives the window start time as its single `x` entry and an
/// empty `v`. Simulation gives up at `horizon`.
pub fn thinning_event<F, R>(
    mut rate: F,
    bound: &BoundStrategy,
    horizon: f64,
    rng: &mut R,
) -> Result<ThinningOutcome>
where
    F: FnMut(f64) -> f64,
    R: Rng + ?Sized,
{
    let mut stats = ThinningStats::default();
    let mut clock = Clock::default();
    let mut now = 0.0;
    let wb = window_bound(bound, &[now], &[], |theta| rate(now + theta));
    clock.open_window(now, wb, bound.safety, rng);
    loop {
        if clock.time > horizon {
            return Ok(ThinningOutcome { time: None, stats });
        }
        now = clock.time;
        match clock.pending {
            Pending::Renewal => {
                stats.lookahead_renewals += 1;
                let start = now;
                let wb = window_bound(bound, &[start], &[], |theta| rate(start + theta));
                clock.open_window(now, wb, bound.safety, rng);
            }
            Pending::Proposal { bound: b } => {
                let r = rate(now);
                if accept_proposal(0, now, r, b, &mut stats, rng)? {
                    return Ok(ThinningOutcome {
                        time: Some(now),
                        stats,
                    });
                }
                clock.propose_from(now, rng);
            }
            Pending::Exact | Pending::Never => {
                return Ok(ThinningOutcome { time: None, stats });
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::diagnostics::{ks_one_sample, ks_two_sample};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    /// Bisection on the integrated rate, independent of the closed form.
    fn numeric_inverse(rate: impl Fn(f64) -> f64, level: f64) -> f64 {
        let integral = |t: f64| {
            let n = 20_000;
            let h = t / n as f64;
            (0..n)
                .map(|k| {
                    let a = k as f64 * h;
                    (rate(a) + 4.0 * rate(a + 0.5 * h) + rate(a + h)) * h / 6.0
                })
                .sum::<f64>()
        };
        let (mut lo, mut hi) = (0.0, 1.0);
        while integral(hi) < level {
            hi *= 2.0;
        }
        for _ in 0..100 {
            let mid = 0.5 * (lo + hi);
            if integral(mid) < level {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    }

    #[test]
    fn constant_rate_inverts_to_scaled_exponential() {
        let p = RateProfile::PiecewiseConstant {
            delay: 0.0,
            rate: 4.0,
        };
        assert_eq!(p.invert(2.0), 0.5);
        let lin = RateProfile::Linear {
            intercept: 4.0,
            slope: 0.0,
        };
        assert_eq!(lin.invert(2.0), 0.5);
    }

    #[test]
    fn shifted_constant_rate() {
        let p = RateProfile::PiecewiseConstant {
            delay: 1.5,
            rate: 2.0,
        };
        assert_eq!(p.invert(1.0), 2.0);
        assert_eq!(p.rate_at(1.0), 0.0);
    }

    #[test]
    fn linear_inversion_matches_quadratic_formula_and_root_finding() {
        for &(a, b, level) in &[(1.0, 2.0, 0.7), (0.3, 0.1, 3.0), (2.0, 5.0, 0.01)] {
            let p = RateProfile::Linear {
                intercept: a,
                slope: b,
            };
            let tau = p.invert(level);
            let quadratic = (-a + (a * a + 2.0 * b * level).sqrt()) / b;
            assert!((tau - quadratic).abs() < 1e-12);
            let numeric = numeric_inverse(|t| (a + b * t).max(0.0), level);
            assert!((tau - numeric).abs() < 1e-8, "{tau} vs {numeric}");
        }
        // negative intercept: silent until the rate turns positive
        let p = RateProfile::Linear {
            intercept: -1.0,
            slope: 2.0,
        };
        let numeric = numeric_inverse(|t| (-1.0 + 2.0 * t).max(0.0), 0.9);
        assert!((p.invert(0.9) - numeric).abs() < 1e-8);
        // decreasing rate with finite total mass 1/2
        let p = RateProfile::Linear {
            intercept: 1.0,
            slope: -1.0,
        };
        assert!(p.invert(0.6).is_infinite());
        let numeric = numeric_inverse(|t| (1.0 - t).max(0.0), 0.3);
        assert!((p.invert(0.3) - numeric).abs() < 1e-8);
    }

    #[test]
    fn zero_rates_never_fire() {
        let p = RateProfile::PiecewiseConstant {
            delay: 0.0,
            rate: 0.0,
        };
        assert!(p.invert(0.1).is_infinite());
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let out = thinning_event(
            |_| 0.0,
            &BoundStrategy::convex_endpoint().with_lookahead(2.0),
            50.0,
            &mut rng,
        )
        .unwrap();
        assert_eq!(out.time, None);
        assert_eq!(out.stats.proposals, 0);
        assert_eq!(out.stats.lookahead_renewals, 25);
    }

    #[test]
    fn thinning_with_exact_constant_bound_never_rejects() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let bound = BoundStrategy::constant(3.0).with_safety(0.0);
        let mut times = Vec::new();
        let mut total = ThinningStats::default();
        for _ in 0..100_000 {
            let out = thinning_event(|_| 3.0, &bound, f64::INFINITY, &mut rng).unwrap();
            total += out.stats;
            times.push(out.time.unwrap());
        }
        assert_eq!(total.proposals, total.accepted);
        let (_, p) = ks_one_sample(&times, |t| 1.0 - (-3.0 * t).exp()).unwrap();
        assert!(p > 0.01, "p = {p}");
    }

    #[test]
    fn thinning_linear_rate_matches_survival_function() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let bound = BoundStrategy::constant(10.0).with_lookahead(10.0);
        let times: Vec<f64> = (0..100_000)
            .map(|_| {
                thinning_event(|t| t, &bound, f64::INFINITY, &mut rng)
                    .unwrap()
                    .time
                    .unwrap()
            })
            .collect();
        let (_, p) = ks_one_sample(&times, |t| 1.0 - (-t * t / 2.0).exp()).unwrap();
        assert!(p > 0.01, "p = {p}");
    }

    #[test]
    fn inversion_and_thinning_agree() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let profile = RateProfile::Linear {
            intercept: 0.5,
            slope: 1.0,
        };
        let inverted: Vec<f64> = (0..20_000)
            .map(|_| inversion_event(profile, &mut rng))
            .collect();
        let bound = BoundStrategy::convex_endpoint().with_lookahead(0.5);
        let thinned: Vec<f64> = (0..20_000)
            .map(|_| {
                thinning_event(|t| 0.5 + t, &bound, f64::INFINITY, &mut rng)
                    .unwrap()
                    .time
                    .unwrap()
            })
            .collect();
        let (_, p) = ks_two_sample(&inverted, &thinned).unwrap();
        assert!(p > 0.01, "p = {p}");
    }

    #[test]
    fn violations_are_hard_errors() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let bound = BoundStrategy::constant(1.0).with_safety(0.0);
        let err = thinning_event(|_| 2.0, &bound, f64::INFINITY, &mut rng).unwrap_err();
        assert!(matches!(err, Error::BoundViolation { clock: 0, .. }));
    }
}
