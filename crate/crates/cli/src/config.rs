//! Experiment configuration files.
//!
//! ```toml
//! seed = 7
//!
//! [model]
//! id = "laplace"
//! dim = 10
//!
//! [sampler]
//! id = "zzs"
//! horizon = 20000.0
//! dt = 0.5
//!
//! [output]
//! dir = "laplace-zzs"
//! ```

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};

pub const OUTPUT_ROOT_VAR: &str = "NSMC_OUTPUT_ROOT";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub seed: u64,
    pub model: ModelConfig,
    pub sampler: SamplerConfig,
    #[serde(default)]
    pub output: OutputConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "id", rename_all = "kebab-case", deny_unknown_fields)]
pub enum ModelConfig {
    /// `beta` wins over `dim`, which means `beta_i = i`.
    Laplace {
        dim: Option<usize>,
        beta: Option<Vec<f64>>,
    },
    /// `variances` wins over `dim`, which means `1 / i^2`.
    Gaussian {
        dim: Option<usize>,
        variances: Option<Vec<f64>>,
    },
    Besselk {
        #[serde(default = "defaults::n_params")]
        n_params: usize,
        #[serde(default = "defaults::n_obs")]
        n_obs: usize,
        #[serde(default = "defaults::n_signals")]
        n_signals: usize,
        #[serde(default = "defaults::magnitude")]
        magnitude: f64,
        #[serde(default = "defaults::data_seed")]
        data_seed: u64,
        p: Option<f64>,
        eps: Option<f64>,
    },
    Circular {
        #[serde(default = "defaults::circular_obs")]
        n_obs: usize,
        /// `(mu1, mu2, lambda1, lambda2, kappa1, kappa2, rho)`.
        #[serde(default = "defaults::circular_truth")]
        truth: Vec<f64>,
        #[serde(default = "defaults::circular_data_seed")]
        data_seed: u64,
        #[serde(default = "defaults::circular_lookahead")]
        lookahead: f64,
    },
    Nuclear {
        #[serde(default = "defaults::four")]
        rows: usize,
        #[serde(default = "defaults::four")]
        cols: usize,
        #[serde(default = "defaults::one")]
        amplitude: f64,
        #[serde(default = "defaults::half")]
        noise: f64,
        #[serde(default = "defaults::half")]
        sigma: f64,
        #[serde(default = "defaults::one")]
        alpha: f64,
        #[serde(default = "defaults::data_seed")]
        data_seed: u64,
        #[serde(default)]
        residual: ResidualChoice,
    },
    Tv {
        #[serde(default = "defaults::image_size")]
        size: usize,
        /// Ground-truth image as an ASCII PGM; the built-in scene otherwise.
        image: Option<PathBuf>,
        #[serde(default = "defaults::tv_sigma")]
        sigma: f64,
        #[serde(default = "defaults::tv_alpha")]
        alpha: f64,
        #[serde(default = "defaults::data_seed")]
        data_seed: u64,
    },
}

impl ModelConfig {
    pub fn id(&self) -> &'static str {
        match self {
            ModelConfig::Laplace { .. } => "laplace",
            ModelConfig::Gaussian { .. } => "gaussian",
            ModelConfig::Besselk { .. } => "besselk",
            ModelConfig::Circular { .. } => "circular",
            ModelConfig::Nuclear { .. } => "nuclear",
            ModelConfig::Tv { .. } => "tv",
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ResidualChoice {
    #[default]
    Envelope,
    Exact,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EventChoice {
    /// Closed-form rates when the model has them, thinning otherwise.
    #[default]
    Auto,
    Exact,
    Thinning,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "id", rename_all = "kebab-case", deny_unknown_fields)]
pub enum SamplerConfig {
    Zzs {
        horizon: f64,
        #[serde(default)]
        events: EventChoice,
        dt: f64,
        #[serde(default)]
        warmup: f64,
    },
    Bps {
        horizon: f64,
        #[serde(default = "defaults::one")]
        refresh: f64,
        #[serde(default)]
        events: EventChoice,
        dt: f64,
        #[serde(default)]
        warmup: f64,
    },
    LocalBps {
        horizon: f64,
        #[serde(default = "defaults::one")]
        refresh: f64,
        dt: f64,
        #[serde(default)]
        warmup: f64,
    },
    Hbps {
        horizon: f64,
        #[serde(default = "defaults::one")]
        refresh: f64,
        dt: f64,
        #[serde(default)]
        warmup: f64,
    },
    Ula {
        n_steps: usize,
        delta: f64,
        lambda: f64,
        burn_in: Option<usize>,
        #[serde(default = "defaults::one_usize")]
        thin: usize,
    },
    Uula {
        n_steps: usize,
        lambda: f64,
        nu: Option<f64>,
        gamma: Option<f64>,
        xi: Option<f64>,
        burn_in: Option<usize>,
        #[serde(default = "defaults::one_usize")]
        thin: usize,
    },
    Pmala {
        n_steps: usize,
        #[serde(default = "defaults::half")]
        delta: f64,
        /// Robbins-Monro steps run before sampling; 0 keeps `delta`.
        #[serde(default)]
        tune_steps: usize,
        #[serde(default = "defaults::acceptance")]
        target_acceptance: f64,
        burn_in: Option<usize>,
        #[serde(default = "defaults::one_usize")]
        thin: usize,
    },
}

impl SamplerConfig {
    pub fn id(&self) -> &'static str {
        match self {
            SamplerConfig::Zzs { .. } => "zzs",
            SamplerConfig::Bps { .. } => "bps",
            SamplerConfig::LocalBps { .. } => "local-bps",
            SamplerConfig::Hbps { .. } => "hbps",
            SamplerConfig::Ula { .. } => "ula",
            SamplerConfig::Uula { .. } => "uula",
            SamplerConfig::Pmala { .. } => "pmala",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    /// Relative to the output root unless absolute.
    #[serde(default = "defaults::out_dir")]
    pub dir: PathBuf,
    /// Coordinates that get a histogram file; the first 16 if omitted.
    pub histograms: Option<Vec<usize>>,
    #[serde(default = "defaults::bins")]
    pub bins: usize,
    #[serde(default = "defaults::max_lag")]
    pub max_lag: usize,
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self {
            dir: defaults::out_dir(),
            histograms: None,
            bins: defaults::bins(),
            max_lag: defaults::max_lag(),
        }
    }
}

mod defaults {
    use std::path::PathBuf;

    pub fn n_params() -> usize {
        50
    }
    pub fn n_obs() -> usize {
        40
    }
    pub fn n_signals() -> usize {
        5
    }
    pub fn magnitude() -> f64 {
        2.0
    }
    pub fn data_seed() -> u64 {
        1
    }
    pub fn circular_data_seed() -> u64 {
        7
    }
    pub fn circular_obs() -> usize {
        30
    }
    pub fn circular_truth() -> Vec<f64> {
        vec![1.0, 4.0, 2.0, 2.0, 1.0, 1.0, 0.5]
    }
    pub fn circular_lookahead() -> f64 {
        0.5
    }
    pub fn four() -> usize {
        4
    }
    pub fn one() -> f64 {
        1.0
    }
    pub fn one_usize() -> usize {
        1
    }
    pub fn half() -> f64 {
        0.5
    }
    pub fn image_size() -> usize {
        32
    }
    pub fn tv_sigma() -> f64 {
        nonsmooth_mcmc::models::DEFAULT_DEBLUR_SIGMA
    }
    pub fn tv_alpha() -> f64 {
        nonsmooth_mcmc::models::DEFAULT_DEBLUR_ALPHA
    }
    pub fn acceptance() -> f64 {
        0.55
    }
    pub fn out_dir() -> PathBuf {
        PathBuf::from("run")
    }
    pub fn bins() -> usize {
        50
    }
    pub fn max_lag() -> usize {
        50
    }
}

impl ExperimentConfig {
    pub fn parse(text: &str) -> CliResult<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
        cfg.check()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text).map_err(|e| match e {
            CliError::Config(m) => CliError::Config(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    /// Output directory under `root`.
    pub fn output_dir(&self, root: &Path) -> PathBuf {
        root.join(&self.output.dir)
    }

    fn check(&self) -> CliResult<()> {
        let bad = |m: &str| Err(CliError::Config(m.to_string()));
        match &self.sampler {
            SamplerConfig::Zzs { horizon, dt, warmup, .. }
            | SamplerConfig::Bps { horizon, dt, warmup, .. }
            | SamplerConfig::LocalBps { horizon, dt, warmup, .. }
            | SamplerConfig::Hbps { horizon, dt, warmup, .. } => {
                if !(*horizon > 0.0 && horizon.is_finite()) {
                    return bad("sampler.horizon must be positive");
                }
                if !(*dt > 0.0 && dt < horizon) {
                    return bad("sampler.dt must be positive and shorter than the horizon");
                }
                if !(*warmup >= 0.0 && warmup.is_finite()) {
                    return bad("sampler.warmup must be non-negative");
                }
            }
            SamplerConfig::Ula { n_steps, burn_in, thin, .. }
            | SamplerConfig::Uula { n_steps, burn_in, thin, .. }
            | SamplerConfig::Pmala { n_steps, burn_in, thin, .. } => {
                if *n_steps == 0 || *thin == 0 {
                    return bad("sampler.n_steps and sampler.thin must be positive");
                }
                if burn_in.is_some_and(|b| b >= *n_steps) {
                    return bad("sampler.burn_in must be smaller than n_steps");
                }
            }
        }
        if self.output.bins == 0 {
            return bad("output.bins must be positive");
        }
        Ok(())
    }
}

/// `$NSMC_OUTPUT_ROOT`, or `runs` under the working directory.
pub fn output_root() -> PathBuf {
    std::env::var_os(OUTPUT_ROOT_VAR)
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from("runs"))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_config_parses_with_defaults() {
        let cfg = ExperimentConfig::parse(
            "seed = 3\n[model]\nid = \"laplace\"\ndim = 4\n[sampler]\nid = \"zzs\"\nhorizon = 10.0\ndt = 0.1\n",
        )
        .unwrap();
        assert_eq!(cfg.model.id(), "laplace");
        assert_eq!(cfg.sampler.id(), "zzs");
        assert_eq!(cfg.output, OutputConfig::default());
    }

    #[test]
    fn unknown_ids_and_fields_are_config_errors() {
        let bad_sampler = "seed = 1\n[model]\nid = \"laplace\"\n[sampler]\nid = \"hmc\"\nn_steps = 3\n";
        assert!(matches!(ExperimentConfig::parse(bad_sampler), Err(CliError::Config(_))));
        let typo = "seed = 1\n[model]\nid = \"laplace\"\nbeat = [1.0]\n[sampler]\nid = \"ula\"\nn_steps = 3\ndelta = 0.1\nlambda = 0.1\n";
        assert!(matches!(ExperimentConfig::parse(typo), Err(CliError::Config(_))));
        let no_seed = "[model]\nid = \"laplace\"\n[sampler]\nid = \"ula\"\nn_steps = 3\ndelta = 0.1\nlambda = 0.1\n";
        assert!(ExperimentConfig::parse(no_seed).is_err());
    }

    #[test]
    fn sampler_ranges_are_checked() {
        let dt_too_long = "seed = 1\n[model]\nid = \"gaussian\"\n[sampler]\nid = \"bps\"\nhorizon = 1.0\ndt = 2.0\n";
        assert!(ExperimentConfig::parse(dt_too_long).is_err());
        let burn = "seed = 1\n[model]\nid = \"gaussian\"\n[sampler]\nid = \"ula\"\nn_steps = 5\nburn_in = 5\ndelta = 0.1\nlambda = 0.1\n";
        assert!(ExperimentConfig::parse(burn).is_err());
    }
}
