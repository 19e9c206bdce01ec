//! The `compare` verb: several samplers on one model, each given the same
//! wall-clock budget.

use std::fmt::Write as _;
use std::path::Path;
use std::str::FromStr;
use std::time::Duration;

use crate::build::build_model;
use crate::config::ExperimentConfig;
use crate::error::{CliError, CliResult};
use crate::run::{run_experiment, thinned_ks, RunOutcome};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Metric {
    EssPerSec,
    MseOverTime,
    Ks,
}

impl FromStr for Metric {
    type Err = CliError;

    fn from_str(s: &str) -> CliResult<Self> {
        match s {
            "ess-per-sec" => Ok(Metric::EssPerSec),
            "mse-over-time" => Ok(Metric::MseOverTime),
            "ks" => Ok(Metric::Ks),
            other => Err(CliError::Config(format!(
                "unknown metric {other:?}; expected ess-per-sec, mse-over-time or ks"
            ))),
        }
    }
}

impl Metric {
    pub fn name(self) -> &'static str {
        match self {
            Metric::EssPerSec => "ess-per-sec",
            Metric::MseOverTime => "mse-over-time",
            Metric::Ks => "ks",
        }
    }

    pub fn header(self) -> &'static str {
        match self {
            Metric::EssPerSec => "sampler,config,wall_time,samples,ess_per_sec_min,ess_per_sec_median,ess_per_sec_max",
            Metric::MseOverTime => "sampler,config,fraction,time,mse",
            Metric::Ks => "sampler,config,wall_time,samples,ks_statistic_max,ks_p_min",
        }
    }
}

/// Points along each run at which the running mean is scored.
const CHECKPOINTS: usize = 10;

/// Runs every config for `budget` and returns the comparison as CSV text.
pub fn compare(
    configs: &[(String, ExperimentConfig)],
    metric: Metric,
    budget: Duration,
    root: &Path,
) -> CliResult<String> {
    if configs.len() < 2 {
        return Err(CliError::Config("compare needs at least two configs".into()));
    }
    let model = &configs[0].1.model;
    if let Some((name, _)) = configs.iter().find(|(_, c)| &c.model != model) {
        return Err(CliError::Config(format!(
            "{name} uses a different model from {}; compare needs one model",
            configs[0].0
        )));
    }
    let mut dirs: Vec<_> = configs.iter().map(|(_, c)| c.output_dir(root)).collect();
    dirs.sort();
    dirs.dedup();
    if dirs.len() != configs.len() {
        return Err(CliError::Config("compared configs must use distinct output directories".into()));
    }
    let built = build_model(model)?;
    if metric == Metric::Ks && built.marginal_cdf.is_none() {
        return Err(CliError::Config(format!(
            "metric ks needs known marginals, which model {} lacks",
            model.id()
        )));
    }

    let mut runs: Vec<(String, RunOutcome)> = Vec::with_capacity(configs.len());
    for (name, cfg) in configs {
        let out = run_experiment(cfg, &cfg.output_dir(root), Some(budget))?;
        runs.push((name.clone(), out));
    }

    let mut table = format!("{}\n", metric.header());
    match metric {
        Metric::EssPerSec => {
            for (name, r) in &runs {
                let mut e = r.report.diagnostics.ess_per_second.clone();
                e.sort_by(f64::total_cmp);
                let _ = writeln!(
                    table,
                    "{},{},{:.3},{},{:.4e},{:.4e},{:.4e}",
                    r.report.sampler,
                    name,
                    r.report.wall_time,
                    r.chain.len(),
                    e[0],
                    e[e.len() / 2],
                    e[e.len() - 1]
                );
            }
        }
        Metric::Ks => {
            let cdf = built.marginal_cdf.as_ref().expect("checked above");
            for (name, r) in &runs {
                let (mut stat, mut p) = (0.0f64, 1.0f64);
                for i in 0..r.chain.dim() {
                    let k = thinned_ks(&r.chain.coordinate(i), r.report.diagnostics.ess[i], |x| cdf(i, x));
                    stat = stat.max(k.statistic);
                    p = p.min(k.p_value);
                }
                let _ = writeln!(
                    table,
                    "{},{},{:.3},{},{:.4},{:.4e}",
                    r.report.sampler,
                    name,
                    r.report.wall_time,
                    r.chain.len(),
                    stat,
                    p
                );
            }
        }
        Metric::MseOverTime => {
            let reference = built.exact_mean.clone().unwrap_or_else(|| pooled_mean(&runs));
            for (name, r) in &runs {
                for (frac, mse) in running_mse(&r.chain.states, &reference) {
                    let _ = writeln!(
                        table,
                        "{},{},{:.2},{:.3},{:.6e}",
                        r.report.sampler,
                        name,
                        frac,
                        frac * r.report.wall_time,
                        mse
                    );
                }
            }
        }
    }
    let path = root.join(format!("comparison_{}.csv", metric.name()));
    std::fs::create_dir_all(root).map_err(CliError::io(root))?;
    std::fs::write(&path, &table).map_err(CliError::io(&path))?;
    Ok(table)
}

/// Average of the final means of all runs, used when the model has no
/// closed-form mean.
fn pooled_mean(runs: &[(String, RunOutcome)]) -> Vec<f64> {
    let d = runs[0].1.chain.dim();
    let mut m = vec![0.0; d];
    for (_, r) in runs {
        for (a, b) in m.iter_mut().zip(r.chain.mean()) {
            *a += b / runs.len() as f64;
        }
    }
    m
}

/// Mean squared error of the running mean at evenly spaced fractions of
/// the chain.
pub fn running_mse(states: &[Vec<f64>], reference: &[f64]) -> Vec<(f64, f64)> {
    let n = states.len();
    let mut sum = vec![0.0; reference.len()];
    let mut out = Vec::with_capacity(CHECKPOINTS);
    let mut next = 1;
    for (k, s) in states.iter().enumerate() {
        for (a, b) in sum.iter_mut().zip(s) {
            *a += b;
        }
        while next <= CHECKPOINTS && (k + 1) * CHECKPOINTS >= next * n {
            let m = (k + 1) as f64;
            let mse = sum
                .iter()
                .zip(reference)
                .map(|(s, r)| (s / m - r).powi(2))
                .sum::<f64>()
                / reference.len() as f64;
            out.push((next as f64 / CHECKPOINTS as f64, mse));
            next += 1;
        }
    }
    out
}
