use rand::Rng;
use rand_distr::{Distribution, Exp};

use super::events::{accept_proposal, window_bound, Clock, Pending, ThinningStats};
use super::{
    boundary_hit, check_start, gaussian_velocity, gradient_conv, snap_to_boundary, Budget,
    EventKind, EventStrategy, Flow, PdmpOptions, PdmpRun, PdmpState, PdmpTrajectory,
};
use crate::error::{invalid, Error, Result};
use crate::target::TargetModel;

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(a, b)| a * b).sum()
}

/// `max(0, <v, grad U(x + v t)>)` with undefined partials set to zero.
pub fn bps_rate(state: &PdmpState, model: &dyn TargetModel, t: f64) -> f64 {
    let x: Vec<f64> = state.x.iter().zip(&state.v).map(|(x, v)| x + v * t).collect();
    let mut g = vec![0.0; x.len()];
    gradient_conv(model, &x, &mut g);
    dot(&state.v, &g).max(0.0)
}

/// Reflection of `v` in the hyperplane orthogonal to `grad`.
pub fn bps_reflect(v: &[f64], grad: &[f64]) -> Result<Vec<f64>> {
    let gg = dot(grad, grad);
    if !(gg > 0.0) {
        return Err(Error::InvariantViolation(
            "reflection against a zero gradient".into(),
        ));
    }
    let c = 2.0 * dot(v, grad) / gg;
    Ok(v.iter().zip(grad).map(|(v, g)| v - c * g).collect())
}

/// Bouncy particle sampler with refreshment rate `refresh_rate`.
pub fn bps_run<R: Rng + ?Sized>(
    model: &dyn TargetModel,
    refresh_rate: f64,
    strategy: &EventStrategy,
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
    let n = model.dim();
    let domain = model.domain();
    let refresh = Exp::new(refresh_rate).map_err(|e| Error::InvalidArgument(e.to_string()))?;
    let mut traj = PdmpTrajectory::new(x0.to_vec(), v0.to_vec(), Flow::Linear)
        .with_capacity_limit(opts.max_events);
    let mut stats = ThinningStats::default();
    let mut budget = Budget::new(opts.time_budget);

    let mut x = x0.to_vec();
    let mut v = v0.to_vec();
    let mut t = 0.0;
    let mut grad = vec![0.0; n];
    let mut scratch = vec![0.0; n];
    let mut clock = Clock::default();

    let mut schedule = |t: f64, x: &[f64], v: &[f64], clock: &mut Clock, rng: &mut R| -> Result<()> {
        match strategy {
            EventStrategy::Exact => {
                let profile = model.directional_rate_profile(x, v).ok_or_else(|| {
                    Error::Unsupported("model has no closed-form bounce rate".into())
                })?;
                clock.schedule_exact(t, profile, rng);
            }
            EventStrategy::Thinning(b) => {
                let wb = window_bound(b, x, v, |theta| {
                    let xe: Vec<f64> = x.iter().zip(v).map(|(x, v)| x + v * theta).collect();
                    gradient_conv(model, &xe, &mut scratch);
                    dot(v, &scratch).max(0.0)
                });
                clock.open_window(t, wb, b.safety, rng);
            }
        }
        Ok(())
    };

    schedule(t, &x, &v, &mut clock, rng)?;
    let mut refresh_t = t + refresh.sample(rng);
    let (dt, mut boundary_i) = boundary_hit(domain, &x, &v);
    let mut boundary_t = t + dt;

    loop {
        let next = clock.time.min(refresh_t).min(boundary_t);
        if next >= opts.horizon || budget.exhausted() {
            let end = if next >= opts.horizon { opts.horizon } else { t };
            Flow::Linear.advance_all(&mut x, &mut v, end - t);
            t = end;
            break;
        }
        Flow::Linear.advance_all(&mut x, &mut v, next - t);
        t = next;

        let changed = if next == boundary_t {
            snap_to_boundary(domain, boundary_i, &mut x, v[boundary_i]);
            v[boundary_i] = -v[boundary_i];
            traj.push(t, EventKind::BoundaryReflect(boundary_i), [(boundary_i, v[boundary_i])])?;
            true
        } else if next == refresh_t {
            v = gaussian_velocity(n, rng);
            traj.push(t, EventKind::Refresh, v.iter().copied().enumerate())?;
            refresh_t = t + refresh.sample(rng);
            true
        } else {
            match clock.pending {
                Pending::Exact => {
                    gradient_conv(model, &x, &mut grad);
                    v = bps_reflect(&v, &grad)?;
                    traj.push(t, EventKind::Bounce, v.iter().copied().enumerate())?;
                    true
                }
                Pending::Renewal => {
                    stats.lookahead_renewals += 1;
                    if opts.record_renewals {
                        traj.push(t, EventKind::LookaheadRenewal, [])?;
                    }
                    schedule(t, &x, &v, &mut clock, rng)?;
                    false
                }
                Pending::Proposal { bound } => {
                    gradient_conv(model, &x, &mut grad);
                    let rate = dot(&v, &grad).max(0.0);
                    if accept_proposal(0, t, rate, bound, &mut stats, rng)? {
                        v = bps_reflect(&v, &grad)?;
                        traj.push(t, EventKind::Bounce, v.iter().copied().enumerate())?;
                        true
                    } else {
                        clock.propose_from(t, rng);
                        false
                    }
                }
                Pending::Never => {
                    return Err(Error::InvariantViolation("idle clock fired".into()));
                }
            }
        };
        if changed {
            schedule(t, &x, &v, &mut clock, rng)?;
            stats.clock_redraws += 1;
            let (dt, i) = boundary_hit(domain, &x, &v);
            boundary_t = t + dt;
            boundary_i = i;
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
    use crate::pdmp::{trajectory_batch_means, RateProfile, Statistic};
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    struct StdGauss(usize);

    impl TargetModel for StdGauss {
        fn dim(&self) -> usize {
            self.0
        }
        fn potential(&self, x: &[f64]) -> f64 {
            0.5 * dot(x, x)
        }
        fn partial(&self, i: usize, x: &[f64]) -> f64 {
            x[i]
        }
        fn directional_rate_profile(&self, x: &[f64], v: &[f64]) -> Option<RateProfile> {
            Some(RateProfile::Linear {
                intercept: dot(x, v),
                slope: dot(v, v),
            })
        }
    }

    #[test]
    fn rate_examples() {
        let g = StdGauss(2);
        let s = PdmpState::new(vec![0.0, 0.0], vec![0.3, -1.0]);
        assert_eq!(bps_rate(&s, &g, 0.0), 0.0);
        let s = PdmpState::new(vec![1.0, 0.0], vec![1.0, 0.0]);
        assert_eq!(bps_rate(&s, &g, 0.0), 1.0);
    }

    #[test]
    fn reflect_examples() {
        assert_eq!(bps_reflect(&[1.0, 1.0], &[1.0, 0.0]).unwrap(), vec![-1.0, 1.0]);
        assert_eq!(bps_reflect(&[0.0, 2.0], &[1.0, 0.0]).unwrap(), vec![0.0, 2.0]);
        assert_eq!(bps_reflect(&[2.0, 0.0], &[3.0, 0.0]).unwrap(), vec![-2.0, 0.0]);
        assert!(bps_reflect(&[1.0], &[0.0]).is_err());
    }

    proptest! {
        #[test]
        fn reflection_is_an_isometric_involution(
            v in prop::collection::vec(-5.0f64..5.0, 4),
            g in prop::collection::vec(-5.0f64..5.0, 4),
        ) {
            prop_assume!(dot(&g, &g) > 1e-6);
            let w = bps_reflect(&v, &g).unwrap();
            let back = bps_reflect(&w, &g).unwrap();
            for (a, b) in back.iter().zip(&v) {
                prop_assert!((a - b).abs() < 1e-12);
            }
            prop_assert!((dot(&w, &w).sqrt() - dot(&v, &v).sqrt()).abs() < 1e-12);
        }
    }

    #[test]
    fn gaussian_moments_and_refresh_count() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let run = bps_run(
            &StdGauss(2),
            1.0,
            &EventStrategy::Exact,
            &[0.0, 0.0],
            &[1.0, 0.0],
            &PdmpOptions::new(100_000.0),
            &mut rng,
        )
        .unwrap();
        let m = trajectory_batch_means(&run.trajectory, Statistic::Coordinate, 50).unwrap();
        let s = trajectory_batch_means(&run.trajectory, Statistic::Square, 50).unwrap();
        for i in 0..2 {
            assert!(m.mean[i].abs() < 3.0 * m.std_error[i], "mean {:?}", m);
            assert!((s.mean[i] - 1.0).abs() < 3.0 * s.std_error[i], "second moment {:?}", s);
        }
        let refreshes = run.trajectory.count(|k| *k == EventKind::Refresh) as f64;
        assert!((refreshes - 100_000.0).abs() < 3.0 * 100_000f64.sqrt());
    }
}
