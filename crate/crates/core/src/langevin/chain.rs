use std::fmt;
use std::time::{Duration, Instant};

use rand::Rng;

use super::steps::{my_ula_step, my_uula_step, pmala_step, UlaConfig, UulaConfig};
use crate::chain::SampleChain;
use crate::error::{invalid, Error, Result};
use crate::target::TargetModel;

/// A Langevin transition kernel with its parameters.
#[derive(Debug, Clone, PartialEq)]
pub enum Sampler {
    Ula(UlaConfig),
    Uula(UulaConfig),
    Pmala { delta: f64 },
}

/// Length, burn-in and thinning of a chain.
#[derive(Debug, Clone, PartialEq)]
pub struct ChainOptions {
    pub n_steps: usize,
    pub burn_in: usize,
    pub thin: usize,
    /// Stop early, keeping the states so far, after this much wall time.
    pub time_budget: Option<Duration>,
}

impl ChainOptions {
    /// Burn-in of 10% and no thinning.
    pub fn new(n_steps: usize) -> Self {
        Self {
            n_steps,
            burn_in: n_steps / 10,
            thin: 1,
            time_budget: None,
        }
    }

    pub fn burn_in(mut self, burn_in: usize) -> Self {
        self.burn_in = burn_in;
        self
    }

    pub fn thin(mut self, thin: usize) -> Self {
        self.thin = thin;
        self
    }
}

/// A chain stopped by an error, with the states stored before it.
#[derive(Debug, Clone)]
pub struct ChainAbort {
    pub partial: SampleChain,
    pub error: Error,
}

impl fmt::Display for ChainAbort {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} ({} states kept)", self.error, self.partial.len())
    }
}

impl std::error::Error for ChainAbort {}

impl From<ChainAbort> for Error {
    fn from(a: ChainAbort) -> Self {
        a.error
    }
}

/// Runs `n_steps` transitions from `x0` and keeps every `thin`-th state
/// after the first `burn_in`.
pub fn run_chain<R: Rng + ?Sized>(
    model: &dyn TargetModel,
    sampler: &Sampler,
    x0: &[f64],
    v0: Option<&[f64]>,
    opts: &ChainOptions,
    rng: &mut R,
) -> std::result::Result<SampleChain, ChainAbort> {
    let abort = |error: Error| ChainAbort {
        partial: SampleChain::default(),
        error,
    };
    if opts.thin == 0 {
        return Err(abort(Error::InvalidArgument("thin must be at least 1".into())));
    }
    if opts.burn_in > opts.n_steps {
        return Err(abort(Error::InvalidArgument(
            "burn-in exceeds the number of steps".into(),
        )));
    }
    if x0.len() != model.dim() {
        return Err(abort(Error::InvalidArgument(format!(
            "initial state has {} coordinates, model expects {}",
            x0.len(),
            model.dim()
        ))));
    }
    let start = Instant::now();
    let mut x = x0.to_vec();
    let mut v = match (sampler, v0) {
        (Sampler::Uula(_), Some(v)) if v.len() == x.len() => v.to_vec(),
        (Sampler::Uula(_), Some(_)) => {
            return Err(abort(Error::InvalidArgument(
                "initial velocity has the wrong dimension".into(),
            )))
        }
        _ => vec![0.0; x.len()],
    };
    let keep = (opts.n_steps - opts.burn_in).div_ceil(opts.thin);
    let mut chain = SampleChain {
        states: Vec::with_capacity(keep),
        accepted: matches!(sampler, Sampler::Pmala { .. }).then(|| Vec::with_capacity(keep)),
        wall_time: 0.0,
    };
    for step in 0..opts.n_steps {
        let res = match sampler {
            Sampler::Ula(c) => my_ula_step(&x, c, model, rng).map(|y| (y, None)),
            Sampler::Uula(c) => my_uula_step(&x, &v, c, model, rng).map(|(y, w)| {
                v = w;
                (y, None)
            }),
            Sampler::Pmala { delta } => pmala_step(&x, *delta, model, rng).map(|(y, a)| (y, Some(a))),
        };
        let (y, acc) = match res {
            Ok(r) => r,
            Err(mut error) => {
                if let Error::Diverged { step: s, .. } = &mut error {
                    *s = step;
                }
                chain.wall_time = start.elapsed().as_secs_f64();
                return Err(ChainAbort {
                    partial: chain,
                    error,
                });
            }
        };
        x = y;
        if step >= opts.burn_in && (step - opts.burn_in).is_multiple_of(opts.thin) {
            chain.states.push(x.clone());
            if let (Some(a), Some(flag)) = (chain.accepted.as_mut(), acc) {
                a.push(flag);
            }
        }
        if let Some(b) = opts.time_budget {
            if step % 64 == 0 && start.elapsed() >= b {
                break;
            }
        }
    }
    chain.wall_time = start.elapsed().as_secs_f64();
    Ok(chain)
}

/// Step size found by [`tune_pmala`] and the state where tuning ended.
#[derive(Debug, Clone, PartialEq)]
pub struct TunedPmala {
    pub delta: f64,
    pub state: Vec<f64>,
    /// Acceptance rate over the second half of the tuning run.
    pub acceptance: f64,
}

/// Robbins-Monro adaptation of the pMALA step size towards a target
/// acceptance rate, updating `log delta` by `(accepted - target) / k^0.6`.
pub fn tune_pmala<R: Rng + ?Sized>(
    model: &dyn TargetModel,
    x0: &[f64],
    delta0: f64,
    target: f64,
    n_steps: usize,
    rng: &mut R,
) -> Result<TunedPmala> {
    if !(delta0 > 0.0) || !(target > 0.0 && target < 1.0) || n_steps == 0 {
        return invalid("need delta0 > 0, target in (0, 1) and at least one step");
    }
    let mut log_delta = delta0.ln();
    let mut x = x0.to_vec();
    let (mut acc, mut counted) = (0usize, 0usize);
    for k in 1..=n_steps {
        let (y, a) = pmala_step(&x, log_delta.exp(), model, rng)?;
        x = y;
        log_delta += (a as u8 as f64 - target) / (k as f64).powf(0.6);
        if 2 * k > n_steps {
            acc += a as usize;
            counted += 1;
        }
    }
    Ok(TunedPmala {
        delta: log_delta.exp(),
        state: x,
        acceptance: acc as f64 / counted.max(1) as f64,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::prox::ProxKind;
    use crate::target::NonsmoothSplit;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    struct Gauss1;

    impl TargetModel for Gauss1 {
        fn dim(&self) -> usize {
            1
        }
        fn potential(&self, x: &[f64]) -> f64 {
            0.5 * x[0] * x[0]
        }
        fn partial(&self, _: usize, x: &[f64]) -> f64 {
            x[0]
        }
    }

    struct Laplace1(ProxKind);

    impl TargetModel for Laplace1 {
        fn dim(&self) -> usize {
            1
        }
        fn potential(&self, x: &[f64]) -> f64 {
            x[0].abs()
        }
        fn partial(&self, _: usize, x: &[f64]) -> f64 {
            if x[0] == 0.0 {
                0.0
            } else {
                x[0].signum()
            }
        }
        fn split(&self) -> Option<&dyn NonsmoothSplit> {
            Some(self)
        }
    }

    impl NonsmoothSplit for Laplace1 {
        fn smooth_potential(&self, _: &[f64]) -> f64 {
            0.0
        }
        fn smooth_gradient(&self, _: &[f64], out: &mut [f64]) {
            out.fill(0.0);
        }
        fn nonsmooth(&self) -> &ProxKind {
            &self.0
        }
    }

    fn laplace() -> Laplace1 {
        Laplace1(ProxKind::WeightedL1 { weights: vec![1.0] })
    }

    #[test]
    fn chain_lengths_and_determinism() {
        let s = Sampler::Ula(UlaConfig::new(0.1, 0.05).unwrap());
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let c = run_chain(&Gauss1, &s, &[0.0], None, &ChainOptions::new(10).burn_in(10), &mut rng)
            .unwrap();
        assert!(c.is_empty());
        let c = run_chain(&Gauss1, &s, &[0.0], None, &ChainOptions::new(100).burn_in(0).thin(2), &mut rng)
            .unwrap();
        assert_eq!(c.len(), 50);
        let go = || {
            let mut rng = ChaCha8Rng::seed_from_u64(9);
            run_chain(&laplace(), &Sampler::Pmala { delta: 0.5 }, &[0.3], None, &ChainOptions::new(500), &mut rng)
                .unwrap()
        };
        assert_eq!(go().states, go().states);
    }

    #[test]
    fn divergence_keeps_partial_chain() {
        struct Repulsive;
        impl TargetModel for Repulsive {
            fn dim(&self) -> usize {
                1
            }
            fn potential(&self, x: &[f64]) -> f64 {
                -x[0] * x[0]
            }
            fn partial(&self, _: usize, x: &[f64]) -> f64 {
                -2.0 * x[0]
            }
        }
        let s = Sampler::Ula(UlaConfig::new(1.0, 1.0).unwrap());
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let err = run_chain(&Repulsive, &s, &[1.0], None, &ChainOptions::new(1000).burn_in(0), &mut rng)
            .unwrap_err();
        assert!(matches!(err.error, Error::Diverged { .. }));
        assert!(!err.partial.is_empty());
    }

    #[test]
    fn ula_gaussian_stationary_variance() {
        let s = Sampler::Ula(UlaConfig::new(0.01, 0.005).unwrap());
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let c = run_chain(&Gauss1, &s, &[0.0], None, &ChainOptions::new(1_000_000), &mut rng).unwrap();
        let m = crate::diagnostics::moments(&c).unwrap();
        assert!(m.variance[0] > 0.98 && m.variance[0] < 1.03, "{}", m.variance[0]);
    }
}
