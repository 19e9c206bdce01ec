//! Event skeletons of piecewise-deterministic trajectories.
//!
//! Only velocity changes are stored. A coordinate's path between two of its
//! own velocity changes is a closed-form flow, so positions at any time are
//! rebuilt by replaying the events coordinate by coordinate.

use crate::chain::SampleChain;
use crate::error::{invalid, Error, Result};

/// Upper limit on stored events unless a sampler is told otherwise.
pub const DEFAULT_MAX_EVENTS: usize = 100_000_000;

/// Deterministic motion between events.
#[derive(Debug, Clone, PartialEq)]
pub enum Flow {
    /// `x(t) = x + v t`, `v` constant.
    Linear,
    /// Exact Hamiltonian flow of `||x - center||^2 / (2 sigma^2)`.
    Harmonic { center: Vec<f64>, sigma: f64 },
}

impl Flow {
    /// Advances coordinate `i` from `(x, v)` by `dt`.
    #[inline]
    pub fn advance(&self, i: usize, x: f64, v: f64, dt: f64) -> (f64, f64) {
        match self {
            Flow::Linear => (x + v * dt, v),
            Flow::Harmonic { center, sigma } => {
                let d = x - center[i];
                let (s, c) = (dt / sigma).sin_cos();
                (center[i] + d * c + v * sigma * s, -d * s / sigma + v * c)
            }
        }
    }

    pub fn advance_all(&self, x: &mut [f64], v: &mut [f64], dt: f64) {
        match self {
            Flow::Linear => {
                for (xi, vi) in x.iter_mut().zip(v.iter()) {
                    *xi += vi * dt;
                }
            }
            Flow::Harmonic { .. } => {
                for i in 0..x.len() {
                    let (a, b) = self.advance(i, x[i], v[i], dt);
                    x[i] = a;
                    v[i] = b;
                }
            }
        }
    }
}

/// Why the velocity changed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EventKind {
    /// Zig-Zag flip of one coordinate.
    Reflect(usize),
    /// Reflection of the full velocity against the gradient.
    Bounce,
    /// Local reflection of the velocity block of one factor.
    FactorBounce(usize),
    Refresh,
    /// Velocity reflected at the boundary of a constrained coordinate.
    BoundaryReflect(usize),
    /// End of a thinning window; velocities are unchanged.
    LookaheadRenewal,
}

impl EventKind {
    pub fn label(&self) -> &'static str {
        match self {
            EventKind::Reflect(_) => "reflect",
            EventKind::Bounce => "bounce",
            EventKind::FactorBounce(_) => "factor-bounce",
            EventKind::Refresh => "refresh",
            EventKind::BoundaryReflect(_) => "boundary",
            EventKind::LookaheadRenewal => "lookahead-renewal",
        }
    }

    /// Coordinate or factor index attached to the event, if any.
    pub fn index(&self) -> Option<usize> {
        match *self {
            EventKind::Reflect(i) | EventKind::FactorBounce(i) | EventKind::BoundaryReflect(i) => {
                Some(i)
            }
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Event {
    pub time: f64,
    pub kind: EventKind,
    start: usize,
    len: usize,
}

/// Event skeleton on `[0, horizon]`.
#[derive(Debug, Clone, PartialEq)]
pub struct PdmpTrajectory {
    x0: Vec<f64>,
    v0: Vec<f64>,
    horizon: f64,
    flow: Flow,
    events: Vec<Event>,
    updates: Vec<(u32, f64)>,
    max_events: usize,
}

impl PdmpTrajectory {
    pub fn new(x0: Vec<f64>, v0: Vec<f64>, flow: Flow) -> Self {
        Self {
            x0,
            v0,
            horizon: 0.0,
            flow,
            events: Vec::new(),
            updates: Vec::new(),
            max_events: DEFAULT_MAX_EVENTS,
        }
    }

    pub fn with_capacity_limit(mut self, max_events: usize) -> Self {
        self.max_events = max_events;
        self
    }

    /// Appends an event; `updates` lists `(coordinate, new velocity)`.
    pub fn push(
        &mut self,
        time: f64,
        kind: EventKind,
        updates: impl IntoIterator<Item = (usize, f64)>,
    ) -> Result<()> {
        if self.events.len() >= self.max_events {
            return Err(Error::CapacityExceeded(self.max_events));
        }
        if let Some(last) = self.events.last() {
            if time < last.time {
                return Err(Error::InvariantViolation(format!(
                    "event at t = {time} recorded after t = {}",
                    last.time
                )));
            }
        }
        let start = self.updates.len();
        self.updates
            .extend(updates.into_iter().map(|(i, v)| (i as u32, v)));
        self.events.push(Event {
            time,
            kind,
            start,
            len: self.updates.len() - start,
        });
        Ok(())
    }

    pub fn finish(&mut self, horizon: f64) {
        self.horizon = horizon;
    }

    pub fn dim(&self) -> usize {
        self.x0.len()
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn flow(&self) -> &Flow {
        &self.flow
    }

    pub fn initial_state(&self) -> (&[f64], &[f64]) {
        (&self.x0, &self.v0)
    }

    pub fn events(&self) -> &[Event] {
        &self.events
    }

    pub fn num_events(&self) -> usize {
        self.events.len()
    }

    /// Counts events whose kind satisfies `pred`.
    pub fn count(&self, pred: impl Fn(&EventKind) -> bool) -> usize {
        self.events.iter().filter(|e| pred(&e.kind)).count()
    }

    pub fn updates(&self, event: &Event) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.updates[event.start..event.start + event.len]
            .iter()
            .map(|&(i, v)| (i as usize, v))
    }

    /// Full `(time, x, v)` right after every event. Costs `O(n)` per event.
    pub fn skeleton(&self) -> Vec<(f64, Vec<f64>, Vec<f64>)> {
        let mut r = Replay::new(self);
        let mut out = Vec::with_capacity(self.events.len());
        for k in 0..self.events.len() {
            let t = self.events[k].time;
            r.apply(k);
            let (x, v) = r.state_at(t);
            out.push((t, x, v));
        }
        out
    }

    /// State at time `t`, by replaying all events up to `t`.
    pub fn state_at(&self, t: f64) -> (Vec<f64>, Vec<f64>) {
        let mut r = Replay::new(self);
        for k in 0..self.events.len() {
            if self.events[k].time > t {
                break;
            }
            r.apply(k);
        }
        r.state_at(t)
    }
}

/// Per-coordinate anchors `(time, position, velocity)` during a replay.
struct Replay<'a> {
    traj: &'a PdmpTrajectory,
    t: Vec<f64>,
    x: Vec<f64>,
    v: Vec<f64>,
}

impl<'a> Replay<'a> {
    fn new(traj: &'a PdmpTrajectory) -> Self {
        Self {
            traj,
            t: vec![0.0; traj.dim()],
            x: traj.x0.clone(),
            v: traj.v0.clone(),
        }
    }

    #[inline]
    fn coord_at(&self, i: usize, t: f64) -> (f64, f64) {
        self.traj.flow.advance(i, self.x[i], self.v[i], t - self.t[i])
    }

    fn reanchor(&mut self, i: usize, t: f64) {
        let (x, v) = self.coord_at(i, t);
        self.x[i] = x;
        self.v[i] = v;
        self.t[i] = t;
    }

    fn apply(&mut self, k: usize) {
        let e = self.traj.events[k];
        for (i, nv) in self.traj.updates(&e) {
            self.reanchor(i, e.time);
            self.v[i] = nv;
        }
    }

    fn state_at(&self, t: f64) -> (Vec<f64>, Vec<f64>) {
        (0..self.x.len()).map(|i| self.coord_at(i, t)).unzip()
    }
}

/// Functions of one coordinate with exact segment integrals.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Statistic {
    Coordinate,
    Abs,
    Square,
}

impl Statistic {
    pub fn eval(&self, x: f64) -> f64 {
        match self {
            Statistic::Coordinate => x,
            Statistic::Abs => x.abs(),
            Statistic::Square => x * x,
        }
    }
}

fn linear_segment_integral(stat: Statistic, x: f64, v: f64, len: f64) -> f64 {
    let y = x + v * len;
    match stat {
        Statistic::Coordinate => len * 0.5 * (x + y),
        Statistic::Square => len * (x * x + x * v * len + v * v * len * len / 3.0),
        Statistic::Abs => {
            if x * y >= 0.0 {
                len * 0.5 * (x.abs() + y.abs())
            } else {
                (x * x + y * y) / (2.0 * v.abs())
            }
        }
    }
}

impl<'a> Replay<'a> {
    /// Integral of `stat` along coordinate `i` from its anchor up to `t`.
    fn integral_to(&self, i: usize, t: f64, stat: Statistic) -> f64 {
        let len = t - self.t[i];
        if len <= 0.0 {
            return 0.0;
        }
        match &self.traj.flow {
            Flow::Linear => linear_segment_integral(stat, self.x[i], self.v[i], len),
            Flow::Harmonic { sigma, .. } => {
                // composite Simpson with step at most sigma / 100
                let mut n = (len / (sigma / 100.0)).ceil() as usize;
                n = (n.max(2) + 1) & !1;
                let h = len / n as f64;
                let f = |k: usize| stat.eval(self.coord_at(i, self.t[i] + k as f64 * h).0);
                let mut s = f(0) + f(n);
                for k in 1..n {
                    s += if k % 2 == 1 { 4.0 } else { 2.0 } * f(k);
                }
                s * h / 3.0
            }
        }
    }
}

/// Integrals of `stat` over consecutive windows `[b_k, b_{k+1}]`, one vector
/// of per-coordinate integrals per window.
fn window_integrals(traj: &PdmpTrajectory, stat: Statistic, bounds: &[f64]) -> Vec<Vec<f64>> {
    let n = traj.dim();
    let mut r = Replay::new(traj);
    let mut out = Vec::with_capacity(bounds.len().saturating_sub(1));
    let mut acc = vec![0.0; n];
    let mut k = 0;
    for &b in &bounds[1..] {
        while k < traj.events.len() && traj.events[k].time < b {
            let e = traj.events[k];
            for (i, nv) in traj.updates(&e) {
                acc[i] += r.integral_to(i, e.time, stat);
                r.reanchor(i, e.time);
                r.v[i] = nv;
            }
            k += 1;
        }
        for (i, a) in acc.iter_mut().enumerate() {
            *a += r.integral_to(i, b, stat);
            r.reanchor(i, b);
        }
        out.push(std::mem::replace(&mut acc, vec![0.0; n]));
    }
    out
}

/// Time average of `stat` over `[0, T]` for every coordinate.
pub fn trajectory_mean(traj: &PdmpTrajectory, stat: Statistic) -> Result<Vec<f64>> {
    let t = traj.horizon();
    if !(t > 0.0) {
        return invalid("trajectory has zero length");
    }
    let w = window_integrals(traj, stat, &[0.0, t]);
    Ok(w[0].iter().map(|s| s / t).collect())
}

/// Time average and batch-means standard error per coordinate.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeAverage {
    pub mean: Vec<f64>,
    pub std_error: Vec<f64>,
}

/// Splits `[0, T]` into `batches` equal windows and reports the spread of the
/// window averages as a Monte Carlo standard error.
pub fn trajectory_batch_means(
    traj: &PdmpTrajectory,
    stat: Statistic,
    batches: usize,
) -> Result<TimeAverage> {
    let t = traj.horizon();
    if !(t > 0.0) {
        return invalid("trajectory has zero length");
    }
    if batches < 2 {
        return invalid("need at least two batches");
    }
    let bounds: Vec<f64> = (0..=batches)
        .map(|k| t * k as f64 / batches as f64)
        .collect();
    let w = window_integrals(traj, stat, &bounds);
    let width = t / batches as f64;
    let n = traj.dim();
    let b = batches as f64;
    let mut mean = vec![0.0; n];
    let mut se = vec![0.0; n];
    for i in 0..n {
        let avgs: Vec<f64> = w.iter().map(|row| row[i] / width).collect();
        let m = avgs.iter().sum::<f64>() / b;
        let var = avgs.iter().map(|a| (a - m) * (a - m)).sum::<f64>() / (b - 1.0);
        mean[i] = m;
        se[i] = (var / b).sqrt();
    }
    Ok(TimeAverage {
        mean,
        std_error: se,
    })
}

/// States at `t = 0, dt, 2 dt, ...` up to `T`.
pub fn trajectory_discretize(traj: &PdmpTrajectory, dt: f64) -> Result<SampleChain> {
    if !(dt > 0.0) {
        return invalid("discretization step must be positive");
    }
    let t_end = traj.horizon();
    let steps = ((t_end / dt) * (1.0 + 1e-12)).floor() as usize;
    let mut r = Replay::new(traj);
    let mut states = Vec::with_capacity(steps + 1);
    let mut k = 0;
    for s in 0..=steps {
        let t = (s as f64 * dt).min(t_end);
        while k < traj.events.len() && traj.events[k].time <= t {
            r.apply(k);
            k += 1;
        }
        states.push(r.state_at(t).0);
    }
    Ok(SampleChain {
        states,
        accepted: None,
        wall_time: 0.0,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn line(x0: f64, v: f64, t: f64) -> PdmpTrajectory {
        let mut tr = PdmpTrajectory::new(vec![x0], vec![v], Flow::Linear);
        tr.finish(t);
        tr
    }

    #[test]
    fn single_segment_means() {
        let tr = line(0.0, 1.0, 1.0);
        assert_eq!(trajectory_mean(&tr, Statistic::Coordinate).unwrap(), vec![0.5]);
        let sq = trajectory_mean(&tr, Statistic::Square).unwrap()[0];
        assert!((sq - 1.0 / 3.0).abs() < 1e-15);
        let tr = line(-1.0, 1.0, 2.0);
        assert_eq!(trajectory_mean(&tr, Statistic::Abs).unwrap(), vec![0.5]);
    }

    #[test]
    fn events_split_segments() {
        // 0 -> 1 on [0, 1], back to 0 on [1, 2]
        let mut tr = PdmpTrajectory::new(vec![0.0], vec![1.0], Flow::Linear);
        tr.push(1.0, EventKind::Reflect(0), [(0, -1.0)]).unwrap();
        tr.finish(2.0);
        assert_eq!(trajectory_mean(&tr, Statistic::Coordinate).unwrap(), vec![0.5]);
        let (x, v) = tr.state_at(1.5);
        assert_eq!((x[0], v[0]), (0.5, -1.0));
        let sk = tr.skeleton();
        assert_eq!(sk[0].1, vec![1.0]);
    }

    #[test]
    fn discretize_endpoints_and_colinearity() {
        let mut tr = PdmpTrajectory::new(vec![1.0, -2.0], vec![0.3, 0.7], Flow::Linear);
        tr.finish(10.0);
        let c = trajectory_discretize(&tr, 10.0).unwrap();
        assert_eq!(c.len(), 2);
        assert_eq!(c.states[1], vec![4.0, 5.0]);
        let c = trajectory_discretize(&tr, 0.37).unwrap();
        let (a, b) = (&c.states[0], c.states.last().unwrap());
        for s in &c.states {
            let cross = (s[0] - a[0]) * (b[1] - a[1]) - (s[1] - a[1]) * (b[0] - a[0]);
            assert!(cross.abs() < 1e-12);
        }
    }

    #[test]
    fn batch_means_match_overall_mean() {
        let mut tr = PdmpTrajectory::new(vec![0.0], vec![1.0], Flow::Linear);
        for k in 1..100 {
            let v = if k % 2 == 1 { -1.0 } else { 1.0 };
            tr.push(k as f64, EventKind::Reflect(0), [(0, v)]).unwrap();
        }
        tr.finish(100.0);
        let all = trajectory_mean(&tr, Statistic::Square).unwrap();
        let bm = trajectory_batch_means(&tr, Statistic::Square, 10).unwrap();
        assert!((all[0] - bm.mean[0]).abs() < 1e-12);
        assert!(bm.std_error[0] < 1e-12);
    }

    #[test]
    fn harmonic_flow_quadrature_matches_closed_form() {
        // x(t) = cos(t), sigma = 1, centre 0: mean of x^2 over [0, 2 pi] is 1/2
        let mut tr = PdmpTrajectory::new(
            vec![1.0],
            vec![0.0],
            Flow::Harmonic {
                center: vec![0.0],
                sigma: 1.0,
            },
        );
        tr.finish(2.0 * std::f64::consts::PI);
        let m = trajectory_mean(&tr, Statistic::Square).unwrap()[0];
        assert!((m - 0.5).abs() < 1e-9);
    }

    #[test]
    fn capacity_guard() {
        let mut tr =
            PdmpTrajectory::new(vec![0.0], vec![1.0], Flow::Linear).with_capacity_limit(1);
        tr.push(0.5, EventKind::Refresh, [(0, 1.0)]).unwrap();
        let err = tr.push(0.6, EventKind::Refresh, [(0, 1.0)]).unwrap_err();
        assert_eq!(err, Error::CapacityExceeded(1));
    }
}
