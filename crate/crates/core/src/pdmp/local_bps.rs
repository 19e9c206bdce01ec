use std::cmp::{Ordering, Reverse};
use std::collections::BinaryHeap;

use rand::Rng;
use rand_distr::{Distribution, Exp};

use super::events::{accept_proposal, window_bound, Clock, Pending, ThinningStats};
use super::{
    check_start, gaussian_velocity, Budget, EventKind, Flow, PdmpOptions, PdmpRun, PdmpState,
    PdmpTrajectory,
};
use crate::error::{invalid, Error, Result};
use crate::target::{BoundKind, FactorGraph, TargetModel};

/// Settings specific to the local bouncy particle sampler.
#[derive(Debug, Clone)]
pub struct LocalBpsOptions {
    pub refresh_rate: f64,
    /// Use closed-form factor rates whenever the model provides them, even
    /// if the factor also carries a thinning bound.
    pub prefer_exact: bool,
    /// Redraw every factor clock after each event (debugging aid).
    pub full_redraw: bool,
}

impl Default for LocalBpsOptions {
    fn default() -> Self {
        Self {
            refresh_rate: 1.0,
            prefer_exact: true,
            full_redraw: false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Key(f64, usize, u64);

impl Eq for Key {}

impl PartialOrd for Key {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Key {
    fn cmp(&self, other: &Self) -> Ordering {
        self.0
            .total_cmp(&other.0)
            .then(self.1.cmp(&other.1))
            .then(self.2.cmp(&other.2))
    }
}

/// Positions are kept lazily: coordinate `i` is exact at `anchor[i]`.
struct LazyState {
    x: Vec<f64>,
    v: Vec<f64>,
    anchor: Vec<f64>,
}

impl LazyState {
    fn sync(&mut self, coords: &[usize], t: f64) {
        for &c in coords {
            self.x[c] += self.v[c] * (t - self.anchor[c]);
            self.anchor[c] = t;
        }
    }

    fn sync_all(&mut self, t: f64) {
        for c in 0..self.x.len() {
            self.x[c] += self.v[c] * (t - self.anchor[c]);
            self.anchor[c] = t;
        }
    }
}

struct Scheduler<'a, R: Rng + ?Sized> {
    graph: &'a dyn FactorGraph,
    opts: &'a LocalBpsOptions,
    clocks: Vec<Clock>,
    version: Vec<u64>,
    heap: BinaryHeap<Reverse<Key>>,
    grad: Vec<f64>,
    saved: Vec<f64>,
    _rng: std::marker::PhantomData<R>,
}

impl<'a, R: Rng + ?Sized> Scheduler<'a, R> {
    fn factor_rate(&mut self, k: usize, s: &LazyState) -> f64 {
        let coords = &self.graph.factors()[k].coords;
        self.grad.resize(coords.len(), 0.0);
        self.graph.factor_gradient(k, &s.x, &mut self.grad);
        coords
            .iter()
            .zip(&self.grad)
            .map(|(&c, g)| s.v[c] * g)
            .sum::<f64>()
            .max(0.0)
    }

    /// Rate of factor `k` after moving its coordinates forward by `theta`.
    fn rate_ahead(&mut self, k: usize, s: &mut LazyState, theta: f64) -> f64 {
        let coords = &self.graph.factors()[k].coords;
        self.saved.clear();
        for &c in coords {
            self.saved.push(s.x[c]);
            s.x[c] += s.v[c] * theta;
        }
        let r = self.factor_rate(k, s);
        for (&c, &old) in coords.iter().zip(&self.saved) {
            s.x[c] = old;
        }
        r
    }

    /// Draws a fresh clock for factor `k`; its coordinates must be synced.
    fn schedule(&mut self, k: usize, t: f64, s: &mut LazyState, rng: &mut R) -> Result<()> {
        let graph = self.graph;
        let factor = &graph.factors()[k];
        let exact = if self.opts.prefer_exact || factor.bound.is_none() {
            self.graph.factor_rate_profile(k, &s.x, &s.v)
        } else {
            None
        };
        match (exact, factor.bound.clone()) {
            (Some(profile), _) => self.clocks[k].schedule_exact(t, profile, rng),
            (None, Some(b)) => {
                let end = match b.kind {
                    BoundKind::ConvexEndpoint => self.rate_ahead(k, s, b.lookahead),
                    _ => 0.0,
                };
                let wb = window_bound(&b, &s.x, &s.v, |_| end);
                self.clocks[k].open_window(t, wb, b.safety, rng);
            }
            (None, None) => {
                return Err(Error::Unsupported(format!(
                    "factor {k} has neither a closed-form rate nor a bound"
                )))
            }
        }
        self.push(k);
        Ok(())
    }

    fn push(&mut self, k: usize) {
        self.version[k] += 1;
        let time = self.clocks[k].time;
        if time.is_finite() {
            self.heap.push(Reverse(Key(time, k, self.version[k])));
        }
    }

    /// Earliest live clock, discarding stale heap entries.
    fn peek(&mut self) -> Option<(f64, usize)> {
        while let Some(Reverse(Key(t, k, ver))) = self.heap.peek().copied() {
            if ver == self.version[k] {
                return Some((t, k));
            }
            self.heap.pop();
        }
        None
    }
}

/// Local bouncy particle sampler on a factor graph.
///
/// Each factor has its own clock. A bounce reflects only the velocity block
/// of the fired factor, so only clocks of factors sharing a coordinate with
/// it are redrawn.
pub fn local_bps_run<R: Rng + ?Sized>(
    model: &dyn TargetModel,
    local: &LocalBpsOptions,
    x0: &[f64],
    v0: &[f64],
    opts: &PdmpOptions,
    rng: &mut R,
) -> Result<PdmpRun> {
    opts.validate()?;
    check_start(model, x0, v0)?;
    if model.domain().is_some() {
        return Err(Error::Unsupported(
            "local BPS does not handle constrained coordinates".into(),
        ));
    }
    if !(local.refresh_rate > 0.0) || !local.refresh_rate.is_finite() {
        return invalid("refreshment rate must be positive");
    }
    let graph = model
        .factor_graph()
        .ok_or_else(|| Error::Unsupported("model has no factor decomposition".into()))?;
    let factors = graph.factors();
    let n = model.dim();
    let nf = factors.len();

    // factors sharing at least one coordinate, including the factor itself
    let mut by_coord = vec![Vec::new(); n];
    for (k, f) in factors.iter().enumerate() {
        for &c in &f.coords {
            by_coord[c].push(k);
        }
    }
    let neighbours: Vec<Vec<usize>> = factors
        .iter()
        .enumerate()
        .map(|(k, f)| {
            let mut nb: Vec<usize> = f.coords.iter().flat_map(|&c| by_coord[c].iter().copied()).collect();
            nb.push(k);
            nb.sort_unstable();
            nb.dedup();
            nb
        })
        .collect();

    let refresh = Exp::new(local.refresh_rate).map_err(|e| Error::InvalidArgument(e.to_string()))?;
    let mut traj = PdmpTrajectory::new(x0.to_vec(), v0.to_vec(), Flow::Linear)
        .with_capacity_limit(opts.max_events);
    let mut stats = ThinningStats::default();
    let mut budget = Budget::new(opts.time_budget);
    let mut s = LazyState {
        x: x0.to_vec(),
        v: v0.to_vec(),
        anchor: vec![0.0; n],
    };
    let mut sched: Scheduler<'_, R> = Scheduler {
        graph,
        opts: local,
        clocks: vec![Clock::default(); nf],
        version: vec![0; nf],
        heap: BinaryHeap::with_capacity(2 * nf),
        grad: Vec::new(),
        saved: Vec::new(),
        _rng: std::marker::PhantomData,
    };
    let mut t = 0.0;
    for k in 0..nf {
        sched.schedule(k, t, &mut s, rng)?;
    }
    let mut refresh_t = refresh.sample(rng);
    let mut block = Vec::new();

    loop {
        let (tf, k) = sched.peek().unwrap_or((f64::INFINITY, usize::MAX));
        let next = tf.min(refresh_t);
        if next >= opts.horizon || budget.exhausted() {
            t = if next >= opts.horizon { opts.horizon } else { t };
            break;
        }
        t = next;
        if refresh_t <= tf {
            s.sync_all(t);
            s.v = gaussian_velocity(n, rng);
            traj.push(t, EventKind::Refresh, s.v.iter().copied().enumerate())?;
            refresh_t = t + refresh.sample(rng);
            for k in 0..nf {
                sched.schedule(k, t, &mut s, rng)?;
            }
            stats.clock_redraws += nf as u64;
            continue;
        }
        let coords = &factors[k].coords;
        s.sync(coords, t);
        let bounce = match sched.clocks[k].pending {
            Pending::Exact => {
                sched.factor_rate(k, &s);
                true
            }
            Pending::Proposal { bound } => {
                let rate = sched.factor_rate(k, &s);
                if accept_proposal(k, t, rate, bound, &mut stats, rng)? {
                    true
                } else {
                    sched.clocks[k].propose_from(t, rng);
                    sched.push(k);
                    false
                }
            }
            Pending::Renewal => {
                stats.lookahead_renewals += 1;
                if opts.record_renewals {
                    traj.push(t, EventKind::LookaheadRenewal, [])?;
                }
                sched.schedule(k, t, &mut s, rng)?;
                false
            }
            Pending::Never => {
                return Err(Error::InvariantViolation("idle clock fired".into()));
            }
        };
        if !bounce {
            continue;
        }
        // reflect the block against the factor gradient left in sched.grad
        let gg: f64 = sched.grad.iter().map(|g| g * g).sum();
        if !(gg > 0.0) {
            return Err(Error::InvariantViolation(format!(
                "factor {k} fired with a zero gradient"
            )));
        }
        let vg: f64 = coords.iter().zip(&sched.grad).map(|(&c, g)| s.v[c] * g).sum();
        let scale = 2.0 * vg / gg;
        block.clear();
        for (&c, g) in coords.iter().zip(&sched.grad) {
            s.v[c] -= scale * g;
            block.push((c, s.v[c]));
        }
        traj.push(t, EventKind::FactorBounce(k), block.iter().copied())?;
        if local.full_redraw {
            s.sync_all(t);
            for m in 0..nf {
                sched.schedule(m, t, &mut s, rng)?;
            }
            stats.clock_redraws += nf as u64;
        } else {
            for &m in &neighbours[k] {
                s.sync(&factors[m].coords, t);
                sched.schedule(m, t, &mut s, rng)?;
            }
            stats.clock_redraws += neighbours[k].len() as u64;
        }
    }
    s.sync_all(t);
    traj.finish(t);
    Ok(PdmpRun {
        trajectory: traj,
        stats,
        final_state: PdmpState { x: s.x, v: s.v, t },
        wall_time: budget.seconds(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pdmp::RateProfile;
    use crate::target::Factor;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    /// Chain `U = sum_i (x_i - x_{i+1})^2 / 2 + sum_i x_i^2 / 2` with pairwise
    /// and unary factors.
    struct ChainGauss {
        n: usize,
        factors: Vec<Factor>,
    }

    impl ChainGauss {
        fn new(n: usize) -> Self {
            let mut factors: Vec<Factor> = (0..n)
                .map(|i| Factor {
                    coords: vec![i],
                    bound: None,
                })
                .collect();
            factors.extend((0..n - 1).map(|i| Factor {
                coords: vec![i, i + 1],
                bound: None,
            }));
            Self { n, factors }
        }
    }

    impl TargetModel for ChainGauss {
        fn dim(&self) -> usize {
            self.n
        }
        fn potential(&self, x: &[f64]) -> f64 {
            (0..self.factors.len()).map(|k| self.factor_potential(k, x)).sum()
        }
        fn partial(&self, i: usize, x: &[f64]) -> f64 {
            let mut g = x[i];
            if i > 0 {
                g += x[i] - x[i - 1];
            }
            if i + 1 < self.n {
                g += x[i] - x[i + 1];
            }
            g
        }
        fn factor_graph(&self) -> Option<&dyn FactorGraph> {
            Some(self)
        }
    }

    impl FactorGraph for ChainGauss {
        fn factors(&self) -> &[Factor] {
            &self.factors
        }
        fn factor_potential(&self, k: usize, x: &[f64]) -> f64 {
            let c = &self.factors[k].coords;
            if c.len() == 1 {
                0.5 * x[c[0]] * x[c[0]]
            } else {
                0.5 * (x[c[0]] - x[c[1]]).powi(2)
            }
        }
        fn factor_gradient(&self, k: usize, x: &[f64], out: &mut [f64]) {
            let c = &self.factors[k].coords;
            if c.len() == 1 {
                out[0] = x[c[0]];
            } else {
                let d = x[c[0]] - x[c[1]];
                out[0] = d;
                out[1] = -d;
            }
        }
        fn factor_rate_profile(&self, k: usize, x: &[f64], v: &[f64]) -> Option<RateProfile> {
            let c = &self.factors[k].coords;
            Some(if c.len() == 1 {
                RateProfile::Linear {
                    intercept: x[c[0]] * v[c[0]],
                    slope: v[c[0]] * v[c[0]],
                }
            } else {
                let (d, w) = (x[c[0]] - x[c[1]], v[c[0]] - v[c[1]]);
                RateProfile::Linear {
                    intercept: d * w,
                    slope: w * w,
                }
            })
        }
    }

    #[test]
    fn redraws_only_touch_neighbouring_factors() {
        let m = ChainGauss::new(6);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let opts = PdmpOptions::new(200.0);
        let local = LocalBpsOptions::default();
        let x0 = vec![0.5; 6];
        let v0 = vec![1.0; 6];
        let run = local_bps_run(&m, &local, &x0, &v0, &opts, &mut rng).unwrap();
        // neighbourhood sizes: unary i touches itself plus adjacent pairs,
        // pair (i, i+1) touches both unaries and adjacent pairs
        let nb = |k: usize| -> u64 {
            if k < 6 {
                1 + (k > 0) as u64 + (k < 5) as u64
            } else {
                let i = k - 6;
                3 + (i > 0) as u64 + (i + 1 < 5) as u64
            }
        };
        let nf = m.factors.len() as u64;
        let mut expected = nf;
        for e in run.trajectory.events() {
            expected += match e.kind {
                EventKind::FactorBounce(k) => nb(k),
                EventKind::Refresh => nf,
                _ => 0,
            };
        }
        assert_eq!(run.stats.clock_redraws + nf, expected);
    }

    #[test]
    fn full_redraw_mode_samples_the_same_law() {
        let m = ChainGauss::new(3);
        let x0 = vec![0.0; 3];
        let v0 = vec![1.0, -1.0, 0.5];
        let opts = PdmpOptions::new(20_000.0);
        let mut means = Vec::new();
        for full in [false, true] {
            let mut rng = ChaCha8Rng::seed_from_u64(9);
            let local = LocalBpsOptions {
                full_redraw: full,
                ..Default::default()
            };
            let run = local_bps_run(&m, &local, &x0, &v0, &opts, &mut rng).unwrap();
            means.push(
                crate::pdmp::trajectory_batch_means(&run.trajectory, crate::pdmp::Statistic::Square, 40)
                    .unwrap(),
            );
        }
        for i in 0..3 {
            let (a, b) = (&means[0], &means[1]);
            let se = (a.std_error[i].powi(2) + b.std_error[i].powi(2)).sqrt();
            assert!((a.mean[i] - b.mean[i]).abs() < 4.0 * se);
        }
    }
}
