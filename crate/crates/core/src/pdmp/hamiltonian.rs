use rand::Rng;
use rand_distr::{Distribution, Exp};

use super::events::{accept_proposal, window_bound, Clock, Pending, ThinningStats};
use super::{
    check_start, gaussian_velocity, Budget, EventKind, Flow, PdmpOptions, PdmpRun, PdmpState,
    PdmpTrajectory,
};
use crate::error::{invalid, Error, Result};
use crate::target::{BoundStrategy, HamiltonianSplit, TargetModel, WindowBound};

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(a, b)| a * b).sum()
}

fn residual_rate(split: &dyn HamiltonianSplit, x: &[f64], v: &[f64], grad: &mut [f64]) -> f64 {
    split.residual_gradient(x, grad);
    dot(v, grad).max(0.0)
}

/// Hamiltonian bouncy particle sampler.
///
/// Between events the state follows the exact flow of the Gaussian part
/// `V(x) = ||x - y||^2 / (2 sigma^2)`:
///
/// ```text
/// x(t) = y + (x0 - y) cos(t / sigma) + v0 sigma sin(t / sigma)
/// v(t) = -(x0 - y) sin(t / sigma) / sigma + v0 cos(t / sigma)
/// ```
///
/// Bounces use the residual `U_hat = U - V`. With `bound = None` the model's
/// energy-based constant bound is used.
pub fn hbps_run<R: Rng + ?Sized>(
    model: &dyn TargetModel,
    refresh_rate: f64,
    bound: Option<&BoundStrategy>,
    x0: &[f64],
    v0: &[f64],
    opts: &PdmpOptions,
    rng: &mut R,
) -> Result<PdmpRun> {
    opts.validate()?;
    check_start(model, x0, v0)?;
    if !(refresh_rate > 0.0) || !refresh_rate.is_finite() {
        return invalid("refreshment rate must be positive");
    }
    let split = model
        .hamiltonian_split()
        .ok_or_else(|| Error::Unsupported("model has no Gaussian component".into()))?;
    if !(split.sigma() > 0.0) {
        return invalid("Gaussian component must have positive sigma");
    }
    let n = model.dim();
    let flow = Flow::Harmonic {
        center: split.center().to_vec(),
        sigma: split.sigma(),
    };
    let refresh = Exp::new(refresh_rate).map_err(|e| Error::InvalidArgument(e.to_string()))?;
    let mut traj =
        PdmpTrajectory::new(x0.to_vec(), v0.to_vec(), flow.clone()).with_capacity_limit(opts.max_events);
    let mut stats = ThinningStats::default();
    let mut budget = Budget::new(opts.time_budget);

    let mut x = x0.to_vec();
    let mut v = v0.to_vec();
    let mut t = 0.0;
    let mut grad = vec![0.0; n];
    let mut clock = Clock::default();

    let schedule = |t: f64, x: &[f64], v: &[f64], clock: &mut Clock, rng: &mut R| -> Result<()> {
        match bound {
            Some(b) => {
                let wb = window_bound(b, x, v, |theta| {
                    let (mut xe, mut ve) = (x.to_vec(), v.to_vec());
                    flow.advance_all(&mut xe, &mut ve, theta);
                    let mut g = vec![0.0; xe.len()];
                    residual_rate(split, &xe, &ve, &mut g)
                });
                clock.open_window(t, wb, b.safety, rng);
            }
            None => {
                let c = split.residual_rate_bound(x, v).ok_or_else(|| {
                    Error::Unsupported("model supplies no residual rate bound".into())
                })?;
                let wb = WindowBound {
                    intercept: c,
                    slope: 0.0,
                    horizon: f64::INFINITY,
                };
                clock.open_window(t, wb, crate::target::DEFAULT_SAFETY, rng);
            }
        }
        Ok(())
    };

    schedule(t, &x, &v, &mut clock, rng)?;
    let mut refresh_t = refresh.sample(rng);

    loop {
        let next = clock.time.min(refresh_t);
        if next >= opts.horizon || budget.exhausted() {
            let end = if next >= opts.horizon { opts.horizon } else { t };
            flow.advance_all(&mut x, &mut v, end - t);
            t = end;
            break;
        }
        flow.advance_all(&mut x, &mut v, next - t);
        t = next;
        let changed = if refresh_t <= clock.time {
            v = gaussian_velocity(n, rng);
            traj.push(t, EventKind::Refresh, v.iter().copied().enumerate())?;
            refresh_t = t + refresh.sample(rng);
            true
        } else {
            match clock.pending {
                Pending::Proposal { bound: b } => {
                    let rate = residual_rate(split, &x, &v, &mut grad);
                    if accept_proposal(0, t, rate, b, &mut stats, rng)? {
                        v = super::bps_reflect(&v, &grad)?;
                        traj.push(t, EventKind::Bounce, v.iter().copied().enumerate())?;
                        true
                    } else {
                        clock.propose_from(t, rng);
                        false
                    }
                }
                Pending::Renewal => {
                    stats.lookahead_renewals += 1;
                    if opts.record_renewals {
                        traj.push(t, EventKind::LookaheadRenewal, [])?;
                    }
                    schedule(t, &x, &v, &mut clock, rng)?;
                    false
                }
                Pending::Exact | Pending::Never => {
                    return Err(Error::InvariantViolation("unexpected clock state".into()));
                }
            }
        };
        if changed {
            schedule(t, &x, &v, &mut clock, rng)?;
            stats.clock_redraws += 1;
        }
    }
    traj.finish(t);
    Ok(PdmpRun {
        trajectory: traj,
        stats,
        final_state: PdmpState { x, v, t },
        wall_time: budget.seconds(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pdmp::{trajectory_batch_means, Statistic};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    struct PureGauss {
        y: Vec<f64>,
        sigma: f64,
    }

    impl TargetModel for PureGauss {
        fn dim(&self) -> usize {
            self.y.len()
        }
        fn potential(&self, x: &[f64]) -> f64 {
            x.iter()
                .zip(&self.y)
                .map(|(x, y)| (x - y).powi(2))
                .sum::<f64>()
                / (2.0 * self.sigma * self.sigma)
        }
        fn partial(&self, i: usize, x: &[f64]) -> f64 {
            (x[i] - self.y[i]) / (self.sigma * self.sigma)
        }
        fn hamiltonian_split(&self) -> Option<&dyn HamiltonianSplit> {
            Some(self)
        }
    }

    impl HamiltonianSplit for PureGauss {
        fn center(&self) -> &[f64] {
            &self.y
        }
        fn sigma(&self) -> f64 {
            self.sigma
        }
        fn residual_potential(&self, _: &[f64]) -> f64 {
            0.0
        }
        fn residual_gradient(&self, _: &[f64], out: &mut [f64]) {
            out.fill(0.0);
        }
        fn residual_rate_bound(&self, _: &[f64], _: &[f64]) -> Option<f64> {
            Some(0.0)
        }
    }

    #[test]
    fn flow_conserves_energy() {
        let y = [0.3, -1.0, 2.0];
        let sigma = 0.7;
        let flow = Flow::Harmonic {
            center: y.to_vec(),
            sigma,
        };
        let energy = |x: &[f64], v: &[f64]| {
            x.iter().zip(&y).map(|(x, y)| (x - y).powi(2)).sum::<f64>() / (2.0 * sigma * sigma)
                + 0.5 * dot(v, v)
        };
        let (x0, v0) = (vec![1.0, 0.5, -0.2], vec![0.4, -1.3, 0.9]);
        let e0 = energy(&x0, &v0);
        for k in 1..200 {
            let (mut x, mut v) = (x0.clone(), v0.clone());
            flow.advance_all(&mut x, &mut v, 0.173 * k as f64);
            assert!((energy(&x, &v) - e0).abs() < 1e-10);
        }
    }

    #[test]
    fn pure_gaussian_never_bounces_and_keeps_its_law() {
        let m = PureGauss {
            y: vec![1.0, -2.0],
            sigma: 0.5,
        };
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let run = hbps_run(
            &m,
            1.0,
            None,
            &[1.0, -2.0],
            &[1.0, 0.0],
            &PdmpOptions::new(20_000.0),
            &mut rng,
        )
        .unwrap();
        assert_eq!(run.trajectory.count(|k| *k == EventKind::Bounce), 0);
        assert_eq!(run.stats.proposals, 0);
        let mean = trajectory_batch_means(&run.trajectory, Statistic::Coordinate, 40).unwrap();
        for i in 0..2 {
            assert!((mean.mean[i] - m.y[i]).abs() < 4.0 * mean.std_error[i]);
        }
        let (x, _) = run.trajectory.state_at(run.trajectory.horizon());
        for (a, b) in x.iter().zip(&run.final_state.x) {
            assert!((a - b).abs() < 1e-9);
        }
    }
}
