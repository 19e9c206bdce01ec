use rand::Rng;

use super::events::{accept_proposal, window_bound, Clock, Pending, ThinningStats};
use super::{
    boundary_hit, check_start, expand_strategies, partial_conv, snap_to_boundary, Budget,
    EventKind, EventStrategy, Flow, PdmpOptions, PdmpRun, PdmpState, PdmpTrajectory,
};
use crate::error::{invalid, Error, Result};
use crate::target::TargetModel;

/// `max(0, dU/dx_i(x + v t) v_i)`.
pub fn zz_rate(i: usize, state: &PdmpState, model: &dyn TargetModel, t: f64) -> f64 {
    let x: Vec<f64> = state.x.iter().zip(&state.v).map(|(x, v)| x + v * t).collect();
    (partial_conv(model, i, &x) * state.v[i]).max(0.0)
}

/// Zig-Zag process on `[0, T]` with one Poisson clock per coordinate.
///
/// After every flip all clocks are redrawn, since each rate depends on the
/// whole trajectory.
pub fn zz_run<R: Rng + ?Sized>(
    model: &dyn TargetModel,
    strategies: &[EventStrategy],
    x0: &[f64],
    v0: &[f64],
    opts: &PdmpOptions,
    rng: &mut R,
) -> Result<PdmpRun> {
    opts.validate()?;
    check_start(model, x0, v0)?;
    if v0.iter().any(|v| v.abs() != 1.0) {
        return invalid("Zig-Zag velocities must be +1 or -1");
    }
    let n = model.dim();
    let strategies = expand_strategies(strategies, n)?;
    let domain = model.domain();
    let mut traj = PdmpTrajectory::new(x0.to_vec(), v0.to_vec(), Flow::Linear)
        .with_capacity_limit(opts.max_events);
    let mut stats = ThinningStats::default();
    let mut budget = Budget::new(opts.time_budget);

    let mut x = x0.to_vec();
    let mut v = v0.to_vec();
    let mut t = 0.0;
    let mut clocks = vec![Clock::default(); n];
    let mut scratch = vec![0.0; n];

    let mut schedule = |i: usize,
                        t: f64,
                        x: &[f64],
                        v: &[f64],
                        clock: &mut Clock,
                        rng: &mut R|
     -> Result<()> {
        match &strategies[i] {
            EventStrategy::Exact => {
                let profile = model.coordinate_rate_profile(i, x, v).ok_or_else(|| {
                    Error::Unsupported(format!("no closed-form rate for coordinate {i}"))
                })?;
                clock.schedule_exact(t, profile, rng);
            }
            EventStrategy::Thinning(b) => {
                let wb = window_bound(b, x, v, |theta| {
                    for k in 0..n {
                        scratch[k] = x[k] + v[k] * theta;
                    }
                    (partial_conv(model, i, &scratch) * v[i]).max(0.0)
                });
                clock.open_window(t, wb, b.safety, rng);
            }
        }
        Ok(())
    };

    for (i, clock) in clocks.iter_mut().enumerate() {
        schedule(i, t, &x, &v, clock, rng)?;
    }
    let (mut boundary_dt, mut boundary_i) = boundary_hit(domain, &x, &v);
    let mut boundary_t = t + boundary_dt;

    loop {
        let (j, tj) = clocks
            .iter()
            .enumerate()
            .fold((0, f64::INFINITY), |acc, (k, c)| {
                if c.time < acc.1 {
                    (k, c.time)
                } else {
                    acc
                }
            });
        let next = tj.min(boundary_t);
        if next >= opts.horizon || budget.exhausted() {
            let end = if next >= opts.horizon { opts.horizon } else { t };
            for k in 0..n {
                x[k] += v[k] * (end - t);
            }
            t = end;
            break;
        }
        for k in 0..n {
            x[k] += v[k] * (next - t);
        }
        t = next;

        let flipped = if boundary_t <= tj {
            snap_to_boundary(domain, boundary_i, &mut x, v[boundary_i]);
            v[boundary_i] = -v[boundary_i];
            traj.push(t, EventKind::BoundaryReflect(boundary_i), [(boundary_i, v[boundary_i])])?;
            true
        } else {
            match clocks[j].pending {
                Pending::Exact => {
                    v[j] = -v[j];
                    traj.push(t, EventKind::Reflect(j), [(j, v[j])])?;
                    true
                }
                Pending::Renewal => {
                    stats.lookahead_renewals += 1;
                    if opts.record_renewals {
                        traj.push(t, EventKind::LookaheadRenewal, [])?;
                    }
                    schedule(j, t, &x, &v, &mut clocks[j], rng)?;
                    false
                }
                Pending::Proposal { bound } => {
                    let rate = (partial_conv(model, j, &x) * v[j]).max(0.0);
                    if accept_proposal(j, t, rate, bound, &mut stats, rng)? {
                        v[j] = -v[j];
                        traj.push(t, EventKind::Reflect(j), [(j, v[j])])?;
                        true
                    } else {
                        clocks[j].propose_from(t, rng);
                        false
                    }
                }
                Pending::Never => {
                    return Err(Error::InvariantViolation("idle clock fired".into()));
                }
            }
        };
        if flipped {
            for (i, c) in clocks.iter_mut().enumerate() {
                schedule(i, t, &x, &v, c, rng)?;
            }
            stats.clock_redraws += n as u64;
            (boundary_dt, boundary_i) = boundary_hit(domain, &x, &v);
            boundary_t = t + boundary_dt;
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
