//! Piecewise-deterministic samplers: Zig-Zag, bouncy particle (global,
//! local and Hamiltonian) and the event-time machinery they share.

mod bps;
mod events;
mod hamiltonian;
mod local_bps;
mod trajectory;
mod zigzag;

use std::time::{Duration, Instant};

use rand::Rng;
use rand_distr::StandardNormal;

pub use bps::{bps_rate, bps_reflect, bps_run};
pub use events::{inversion_event, thinning_event, RateProfile, ThinningOutcome, ThinningStats};
pub use hamiltonian::hbps_run;
pub use local_bps::{local_bps_run, LocalBpsOptions};
pub use trajectory::{
    trajectory_batch_means, trajectory_discretize, trajectory_mean, Event, EventKind, Flow,
    PdmpTrajectory, Statistic, TimeAverage, DEFAULT_MAX_EVENTS,
};
pub use zigzag::{zz_rate, zz_run};

use crate::error::{invalid, Result};
use crate::target::{BoundStrategy, Interval, TargetModel};

/// Position, velocity and time of a running process.
#[derive(Debug, Clone, PartialEq)]
pub struct PdmpState {
    pub x: Vec<f64>,
    pub v: Vec<f64>,
    pub t: f64,
}

impl PdmpState {
    pub fn new(x: Vec<f64>, v: Vec<f64>) -> Self {
        Self { x, v, t: 0.0 }
    }
}

/// How a clock generates its event times.
#[derive(Debug, Clone)]
pub enum EventStrategy {
    /// Inversion of the closed-form rate supplied by the model.
    Exact,
    /// Thinning against the given bound.
    Thinning(BoundStrategy),
}

/// Settings shared by all samplers in this module.
#[derive(Debug, Clone)]
pub struct PdmpOptions {
    pub horizon: f64,
    pub max_events: usize,
    /// Store look-ahead renewals in the trajectory as well.
    pub record_renewals: bool,
    /// Stop early, at the next event, once this much wall time has passed.
    pub time_budget: Option<Duration>,
}

impl PdmpOptions {
    pub fn new(horizon: f64) -> Self {
        Self {
            horizon,
            max_events: DEFAULT_MAX_EVENTS,
            record_renewals: false,
            time_budget: None,
        }
    }

    pub fn with_time_budget(mut self, budget: Duration) -> Self {
        self.time_budget = Some(budget);
        self
    }

    fn validate(&self) -> Result<()> {
        if !(self.horizon > 0.0) || !self.horizon.is_finite() {
            return invalid("horizon must be positive and finite");
        }
        Ok(())
    }
}

/// Output of a sampler run.
#[derive(Debug, Clone)]
pub struct PdmpRun {
    pub trajectory: PdmpTrajectory,
    pub stats: ThinningStats,
    pub final_state: PdmpState,
    /// Seconds spent simulating.
    pub wall_time: f64,
}

/// Checks the wall clock every few hundred events.
struct Budget {
    start: Instant,
    limit: Option<Duration>,
    ticks: u32,
}

impl Budget {
    fn new(limit: Option<Duration>) -> Self {
        Self {
            start: Instant::now(),
            limit,
            ticks: 0,
        }
    }

    fn exhausted(&mut self) -> bool {
        let Some(limit) = self.limit else {
            return false;
        };
        self.ticks = self.ticks.wrapping_add(1);
        self.ticks.is_multiple_of(256) && self.start.elapsed() >= limit
    }

    fn seconds(&self) -> f64 {
        self.start.elapsed().as_secs_f64()
    }
}

fn check_start(model: &dyn TargetModel, x0: &[f64], v0: &[f64]) -> Result<()> {
    let n = model.dim();
    if x0.len() != n || v0.len() != n {
        return invalid(format!(
            "initial state has dimensions ({}, {}), model expects {n}",
            x0.len(),
            v0.len()
        ));
    }
    if x0.iter().chain(v0).any(|a| !a.is_finite()) {
        return invalid("initial state must be finite");
    }
    if let Some(dom) = model.domain() {
        for (i, (xi, d)) in x0.iter().zip(dom).enumerate() {
            if *xi < d.lo || *xi > d.hi {
                return invalid(format!("x0[{i}] = {xi} lies outside its domain"));
            }
        }
    }
    Ok(())
}

fn expand_strategies(strategies: &[EventStrategy], n: usize) -> Result<Vec<EventStrategy>> {
    match strategies.len() {
        1 => Ok(vec![strategies[0].clone(); n]),
        m if m == n => Ok(strategies.to_vec()),
        m => invalid(format!("expected 1 or {n} event strategies, got {m}")),
    }
}

/// Partial derivative with undefined values replaced by zero.
#[inline]
fn partial_conv(model: &dyn TargetModel, i: usize, x: &[f64]) -> f64 {
    if model.is_kink(i, x) {
        0.0
    } else {
        model.partial(i, x)
    }
}

fn gradient_conv(model: &dyn TargetModel, x: &[f64], out: &mut [f64]) {
    model.gradient(x, out);
    for (i, g) in out.iter_mut().enumerate() {
        if model.is_kink(i, x) {
            *g = 0.0;
        }
    }
}

/// First time a linearly moving point leaves its box, with the coordinate.
fn boundary_hit(domain: Option<&[Interval]>, x: &[f64], v: &[f64]) -> (f64, usize) {
    let mut best = (f64::INFINITY, 0);
    if let Some(dom) = domain {
        for (i, d) in dom.iter().enumerate() {
            let dt = if v[i] > 0.0 {
                (d.hi - x[i]) / v[i]
            } else if v[i] < 0.0 {
                (d.lo - x[i]) / v[i]
            } else {
                f64::INFINITY
            };
            if dt < best.0 {
                best = (dt.max(0.0), i);
            }
        }
    }
    best
}

fn snap_to_boundary(domain: Option<&[Interval]>, i: usize, x: &mut [f64], v: f64) {
    if let Some(dom) = domain {
        x[i] = if v > 0.0 { dom[i].hi } else { dom[i].lo };
    }
}

fn gaussian_velocity<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Vec<f64> {
    (0..n).map(|_| rng.sample(StandardNormal)).collect()
}
