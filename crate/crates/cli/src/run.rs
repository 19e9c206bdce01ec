//! The `run` verb: one experiment, its samples and its diagnostics.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Duration;

use nonsmooth_mcmc::diagnostics::{image_metrics, ks_one_sample, DiagnosticsReport, KsResult};
use nonsmooth_mcmc::langevin::{run_chain, tune_pmala, ChainOptions, Sampler, UlaConfig, UulaConfig};
use nonsmooth_mcmc::pdmp::*;
use nonsmooth_mcmc::SampleChain;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::StandardNormal;
use serde::Serialize;

use crate::build::{build_model, BuiltModel};
use crate::config::{ExperimentConfig, SamplerConfig};
use crate::error::{CliError, CliResult};
use crate::pgm::{write_pgm, Greymap};
use crate::plotdata::{default_coords, write_histogram};

/// Everything a run produced, kept in memory for `compare`.
pub struct RunOutcome {
    pub dir: PathBuf,
    pub chain: SampleChain,
    pub trajectory: Option<PdmpTrajectory>,
    pub report: RunReport,
}

#[derive(Debug, Clone, Serialize)]
pub struct RunReport {
    pub model: String,
    pub sampler: String,
    pub seed: u64,
    /// Seconds of sampling, excluding model construction and warm-up.
    pub wall_time: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub acceptance_rate: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub pmala_delta: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub trajectory: Option<TrajectorySummary>,
    pub diagnostics: DiagnosticsReport,
}

/// Exact time averages of the continuous path and event counts.
#[derive(Debug, Clone, Serialize)]
pub struct TrajectorySummary {
    pub horizon: f64,
    pub events: usize,
    pub reflections: usize,
    pub refreshments: usize,
    pub boundary_reflections: usize,
    pub proposals: u64,
    pub accepted_proposals: u64,
    pub bound_violations: u64,
    pub mean: Vec<f64>,
    pub abs_mean: Vec<f64>,
    pub second_moment: Vec<f64>,
}

fn gaussian_vector<R: Rng>(n: usize, rng: &mut R) -> Vec<f64> {
    (0..n).map(|_| rng.sample(StandardNormal)).collect()
}

fn signs<R: Rng>(n: usize, rng: &mut R) -> Vec<f64> {
    (0..n).map(|_| if rng.random::<bool>() { 1.0 } else { -1.0 }).collect()
}

/// Runs the configured experiment and writes its artifacts into `dir`.
///
/// With a `budget` the sampler stops at the first event or step after that
/// much wall time; results are then no longer reproducible.
pub fn run_experiment(
    cfg: &ExperimentConfig,
    dir: &Path,
    budget: Option<Duration>,
) -> CliResult<RunOutcome> {
    let built = build_model(&cfg.model)?;
    std::fs::create_dir_all(dir).map_err(CliError::io(dir))?;
    let mut rng = ChaCha20Rng::seed_from_u64(cfg.seed);
    let sampled = match &cfg.sampler {
        SamplerConfig::Ula { .. } | SamplerConfig::Uula { .. } | SamplerConfig::Pmala { .. } => {
            langevin(cfg, &built, budget, &mut rng)
        }
        _ => pdmp(cfg, &built, budget, &mut rng),
    };
    let (chain, trajectory, extra, failure) = match sampled {
        Ok(Sampled { chain, trajectory, extra }) => (chain, trajectory, extra, None),
        Err(Failure::Fatal(e)) => return Err(e),
        Err(Failure::Partial { chain, error }) => (chain, None, Extra::default(), Some(error)),
    };

    write_samples(&dir.join("samples.csv"), &chain)?;
    if let Some(t) = &trajectory {
        write_events(&dir.join("events.log"), t)?;
    }
    if chain.len() < 2 {
        return Err(failure.unwrap_or_else(|| {
            CliError::Config("run produced fewer than two samples; lengthen it".into())
        }));
    }
    let report = make_report(cfg, &built, &chain, trajectory.as_ref(), extra)?;
    let text = toml::to_string(&report)
        .map_err(|e| CliError::Config(format!("cannot serialise the report: {e}")))?;
    let report_path = dir.join("report.txt");
    std::fs::write(&report_path, text).map_err(CliError::io(&report_path))?;
    let coords = cfg
        .output
        .histograms
        .clone()
        .unwrap_or_else(|| default_coords(chain.dim()));
    for i in coords {
        if i >= chain.dim() {
            return Err(CliError::Config(format!("histogram coordinate {i} out of range")));
        }
        write_histogram(&dir.join(format!("histogram_{i}.csv")), &chain.coordinate(i), cfg.output.bins)?;
    }
    if let Some(img) = &built.image {
        let mean = chain.mean();
        for (name, pixels) in [("mean.pgm", &mean), ("truth.pgm", &img.truth), ("observation.pgm", &img.observation)] {
            let g = Greymap {
                rows: img.rows,
                cols: img.cols,
                pixels: pixels.clone(),
            };
            write_pgm(&dir.join(name), &g)?;
        }
    }
    if let Some(e) = failure {
        return Err(e);
    }
    Ok(RunOutcome {
        dir: dir.to_path_buf(),
        chain,
        trajectory,
        report,
    })
}

struct Sampled {
    chain: SampleChain,
    trajectory: Option<PdmpTrajectory>,
    extra: Extra,
}

#[derive(Default)]
struct Extra {
    stats: Option<ThinningStats>,
    delta: Option<f64>,
}

enum Failure {
    Fatal(CliError),
    /// The sampler stopped early; whatever it stored is still written out.
    Partial { chain: SampleChain, error: CliError },
}

impl From<CliError> for Failure {
    fn from(e: CliError) -> Self {
        Failure::Fatal(e)
    }
}

impl From<nonsmooth_mcmc::Error> for Failure {
    fn from(e: nonsmooth_mcmc::Error) -> Self {
        Failure::Fatal(e.into())
    }
}

fn langevin(
    cfg: &ExperimentConfig,
    built: &BuiltModel,
    budget: Option<Duration>,
    rng: &mut ChaCha20Rng,
) -> Result<Sampled, Failure> {
    let model = built.target.as_ref();
    let mut x0 = built.start.clone();
    let mut delta_used = None;
    let (sampler, n_steps, burn_in, thin) = match &cfg.sampler {
        SamplerConfig::Ula { n_steps, delta, lambda, burn_in, thin } => {
            (Sampler::Ula(UlaConfig::new(*delta, *lambda)?), *n_steps, *burn_in, *thin)
        }
        SamplerConfig::Uula { n_steps, lambda, nu, gamma, xi, burn_in, thin } => {
            let c = UulaConfig::new(
                *lambda,
                nu.unwrap_or(2.0 * lambda),
                gamma.unwrap_or(2.0),
                xi.unwrap_or(1.0 / lambda),
            )?;
            (Sampler::Uula(c), *n_steps, *burn_in, *thin)
        }
        SamplerConfig::Pmala { n_steps, delta, tune_steps, target_acceptance, burn_in, thin } => {
            let mut delta = *delta;
            if *tune_steps > 0 {
                let tuned = tune_pmala(model, &x0, delta, *target_acceptance, *tune_steps, rng)?;
                delta = tuned.delta;
                x0 = tuned.state;
            }
            delta_used = Some(delta);
            (Sampler::Pmala { delta }, *n_steps, *burn_in, *thin)
        }
        _ => unreachable!("not a Langevin sampler"),
    };
    let mut opts = ChainOptions::new(n_steps).thin(thin);
    if let Some(b) = burn_in {
        opts = opts.burn_in(b);
    }
    opts.time_budget = budget;
    match run_chain(model, &sampler, &x0, None, &opts, rng) {
        Ok(chain) => Ok(Sampled {
            chain,
            trajectory: None,
            extra: Extra {
                stats: None,
                delta: delta_used,
            },
        }),
        Err(abort) => Err(Failure::Partial {
            chain: abort.partial,
            error: abort.error.into(),
        }),
    }
}

fn pdmp(
    cfg: &ExperimentConfig,
    built: &BuiltModel,
    budget: Option<Duration>,
    rng: &mut ChaCha20Rng,
) -> Result<Sampled, Failure> {
    let model = built.target.as_ref();
    let n = model.dim();
    let (horizon, dt, warmup) = match &cfg.sampler {
        SamplerConfig::Zzs { horizon, dt, warmup, .. }
        | SamplerConfig::Bps { horizon, dt, warmup, .. }
        | SamplerConfig::LocalBps { horizon, dt, warmup, .. }
        | SamplerConfig::Hbps { horizon, dt, warmup, .. } => (*horizon, *dt, *warmup),
        _ => unreachable!("not a piecewise-deterministic sampler"),
    };
    let go = |x0: &[f64], v0: &[f64], opts: &PdmpOptions, rng: &mut ChaCha20Rng| -> Result<PdmpRun, Failure> {
        Ok(match &cfg.sampler {
            SamplerConfig::Zzs { events, .. } => {
                zz_run(model, &built.zz_strategies(*events)?, x0, v0, opts, rng)?
            }
            SamplerConfig::Bps { refresh, events, .. } => {
                bps_run(model, *refresh, &built.bps_strategy(*events)?, x0, v0, opts, rng)?
            }
            SamplerConfig::LocalBps { refresh, .. } => {
                let o = LocalBpsOptions {
                    refresh_rate: *refresh,
                    ..Default::default()
                };
                local_bps_run(model, &o, x0, v0, opts, rng)?
            }
            SamplerConfig::Hbps { refresh, .. } => hbps_run(model, *refresh, None, x0, v0, opts, rng)?,
            _ => unreachable!(),
        })
    };
    let mut x0 = built.start.clone();
    let mut v0 = match cfg.sampler {
        SamplerConfig::Zzs { .. } => signs(n, rng),
        _ => gaussian_vector(n, rng),
    };
    if warmup > 0.0 {
        let w = go(&x0, &v0, &PdmpOptions::new(warmup), rng)?;
        x0 = w.final_state.x;
        v0 = w.final_state.v;
    }
    let mut opts = PdmpOptions::new(horizon);
    opts.time_budget = budget;
    let run = go(&x0, &v0, &opts, rng)?;
    let mut chain = trajectory_discretize(&run.trajectory, dt)?;
    chain.map_states(|x| model.canonicalize(x));
    chain.wall_time = run.wall_time;
    Ok(Sampled {
        chain,
        trajectory: Some(run.trajectory),
        extra: Extra {
            stats: Some(run.stats),
            delta: None,
        },
    })
}

fn make_report(
    cfg: &ExperimentConfig,
    built: &BuiltModel,
    chain: &SampleChain,
    trajectory: Option<&PdmpTrajectory>,
    extra: Extra,
) -> CliResult<RunReport> {
    let max_lag = cfg.output.max_lag.min(chain.len() - 1);
    let mut diagnostics = DiagnosticsReport::from_chain(chain, max_lag)?;
    if let Some(cdf) = &built.marginal_cdf {
        diagnostics.ks = Some(
            (0..chain.dim())
                .map(|i| thinned_ks(&chain.coordinate(i), diagnostics.ess[i], |x| cdf(i, x)))
                .collect(),
        );
    }
    if let Some(img) = &built.image {
        let m = image_metrics(&chain.mean(), &img.truth)?;
        diagnostics.mse = Some(m.mse);
        diagnostics.ssim = Some(m.ssim);
    }
    let trajectory = match (trajectory, extra.stats) {
        (Some(t), Some(stats)) => Some(TrajectorySummary {
            horizon: t.horizon(),
            events: t.num_events(),
            reflections: t.count(|k| {
                matches!(k, EventKind::Reflect(_) | EventKind::Bounce | EventKind::FactorBounce(_))
            }),
            refreshments: t.count(|k| matches!(k, EventKind::Refresh)),
            boundary_reflections: t.count(|k| matches!(k, EventKind::BoundaryReflect(_))),
            proposals: stats.proposals,
            accepted_proposals: stats.accepted,
            bound_violations: stats.bound_violations,
            mean: trajectory_mean(t, Statistic::Coordinate)?,
            abs_mean: trajectory_mean(t, Statistic::Abs)?,
            second_moment: trajectory_mean(t, Statistic::Square)?,
        }),
        _ => None,
    };
    Ok(RunReport {
        model: cfg.model.id().into(),
        sampler: cfg.sampler.id().into(),
        seed: cfg.seed,
        wall_time: chain.wall_time,
        acceptance_rate: chain.acceptance_rate(),
        pmala_delta: extra.delta,
        trajectory,
        diagnostics,
    })
}

/// KS test on every `ceil(N / ess)`-th draw, so that the draws are roughly
/// independent; NaN when too few remain.
pub fn thinned_ks(x: &[f64], ess: f64, cdf: impl Fn(f64) -> f64) -> KsResult {
    let step = ((x.len() as f64 / ess.max(1.0)).ceil() as usize).max(1);
    let kept: Vec<f64> = x.iter().step_by(step).copied().collect();
    match ks_one_sample(&kept, cdf) {
        Ok((statistic, p_value)) => KsResult { statistic, p_value },
        Err(_) => KsResult {
            statistic: f64::NAN,
            p_value: f64::NAN,
        },
    }
}

/// One state per row, shortest round-trip formatting.
pub fn write_samples(path: &Path, chain: &SampleChain) -> CliResult<()> {
    let d = chain.dim();
    let mut out = String::new();
    let header: Vec<String> = (0..d).map(|i| format!("x{i}")).collect();
    let _ = writeln!(out, "{}", header.join(","));
    for s in &chain.states {
        for (i, v) in s.iter().enumerate() {
            if i > 0 {
                out.push(',');
            }
            let _ = write!(out, "{v}");
        }
        out.push('\n');
    }
    std::fs::write(path, out).map_err(CliError::io(path))
}

fn write_events(path: &Path, t: &PdmpTrajectory) -> CliResult<()> {
    let mut out = String::from("time,kind,coordinate\n");
    for e in t.events() {
        let coord = e.kind.index().map_or_else(|| "-".to_string(), |i| i.to_string());
        let _ = writeln!(out, "{},{},{}", e.time, e.kind.label(), coord);
    }
    std::fs::write(path, out).map_err(CliError::io(path))
}
