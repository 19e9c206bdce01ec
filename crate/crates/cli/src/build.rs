//! Turns configuration sections into models and event strategies.

use nonsmooth_mcmc::models::*;
use nonsmooth_mcmc::pdmp::EventStrategy;
use nonsmooth_mcmc::target::BoundStrategy;
use nonsmooth_mcmc::TargetModel;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::config::{EventChoice, ModelConfig, ResidualChoice};
use crate::error::{CliError, CliResult};
use crate::pgm::read_pgm;

/// Marginal law of one coordinate, when known in closed form.
pub type MarginalCdf = Box<dyn Fn(usize, f64) -> f64 + Send + Sync>;

/// Ground truth of an image experiment.
#[derive(Debug, Clone, PartialEq)]
pub struct ImageTruth {
    pub rows: usize,
    pub cols: usize,
    pub truth: Vec<f64>,
    pub observation: Vec<f64>,
}

pub struct BuiltModel {
    pub target: Box<dyn TargetModel>,
    /// Default starting point of every sampler.
    pub start: Vec<f64>,
    pub marginal_cdf: Option<MarginalCdf>,
    pub exact_mean: Option<Vec<f64>>,
    pub image: Option<ImageTruth>,
    zz: Rates,
    bps: Rates,
}

/// What a model offers to an event-driven sampler.
enum Rates {
    Exact,
    Bounds(Vec<BoundStrategy>),
    Unavailable,
}

fn config_err(e: nonsmooth_mcmc::Error) -> CliError {
    CliError::Config(e.to_string())
}

fn normal_cdf(variances: Vec<f64>) -> MarginalCdf {
    Box::new(move |i, x| {
        let z = x / (2.0 * variances[i]).sqrt();
        0.5 * statrs::function::erf::erfc(-z)
    })
}

pub fn build_model(cfg: &ModelConfig) -> CliResult<BuiltModel> {
    match cfg {
        ModelConfig::Laplace { dim, beta } => {
            let beta = match (beta, dim) {
                (Some(b), _) => b.clone(),
                (None, Some(n)) => (1..=*n).map(|i| i as f64).collect(),
                (None, None) => return Err(CliError::Config("laplace needs beta or dim".into())),
            };
            let m = build_laplace(beta).map_err(config_err)?;
            let n = m.dim();
            let bps = Rates::Bounds(vec![m.bps_bound()]);
            let cdf_model = m.clone();
            Ok(BuiltModel {
                start: vec![0.0; n],
                marginal_cdf: Some(Box::new(move |i, x| cdf_model.marginal_cdf(i, x))),
                exact_mean: Some(vec![0.0; n]),
                image: None,
                zz: Rates::Exact,
                bps,
                target: Box::new(m),
            })
        }
        ModelConfig::Gaussian { dim, variances } => {
            let variances = match (variances, dim) {
                (Some(v), _) => v.clone(),
                (None, Some(n)) => default_variances(*n),
                (None, None) => {
                    return Err(CliError::Config("gaussian needs variances or dim".into()))
                }
            };
            let m = build_gaussian(variances.clone()).map_err(config_err)?;
            let n = m.dim();
            Ok(BuiltModel {
                target: Box::new(m),
                start: vec![0.0; n],
                marginal_cdf: Some(normal_cdf(variances)),
                exact_mean: Some(vec![0.0; n]),
                image: None,
                zz: Rates::Exact,
                bps: Rates::Exact,
            })
        }
        ModelConfig::Besselk {
            n_params,
            n_obs,
            n_signals,
            magnitude,
            data_seed,
            p,
            eps,
        } => {
            let data = synthetic_logistic(*n_params, *n_obs, *n_signals, *magnitude, *data_seed)
                .map_err(config_err)?;
            let m = build_besselk_logistic(
                data.design,
                data.labels,
                p.unwrap_or(DEFAULT_BESSEL_P),
                eps.unwrap_or(DEFAULT_BESSEL_EPS),
            )
            .map_err(config_err)?;
            let zz = Rates::Bounds(m.zz_bounds().map_err(config_err)?);
            Ok(BuiltModel {
                target: Box::new(m),
                start: vec![0.0; *n_params],
                marginal_cdf: None,
                exact_mean: None,
                image: None,
                zz,
                bps: Rates::Unavailable,
            })
        }
        ModelConfig::Circular {
            n_obs,
            truth,
            data_seed,
            lookahead,
        } => {
            let params: [f64; CIRCULAR_DIM] = truth.as_slice().try_into().map_err(|_| {
                CliError::Config(format!("circular truth needs {CIRCULAR_DIM} values"))
            })?;
            if !(*lookahead > 0.0) {
                return Err(CliError::Config("circular lookahead must be positive".into()));
            }
            let mut rng = ChaCha20Rng::seed_from_u64(*data_seed);
            let data = sample_wrapped_mixture(&params, *n_obs, &mut rng).map_err(config_err)?;
            let m = build_wrapped_mixture(data).map_err(config_err)?;
            let zz = Rates::Bounds(m.zz_bounds(*lookahead));
            let bps = Rates::Bounds(vec![m.bps_bound(*lookahead)]);
            Ok(BuiltModel {
                target: Box::new(m),
                start: params.to_vec(),
                marginal_cdf: None,
                exact_mean: None,
                image: None,
                zz,
                bps,
            })
        }
        ModelConfig::Nuclear {
            rows,
            cols,
            amplitude,
            noise,
            sigma,
            alpha,
            data_seed,
            residual,
        } => {
            let mut rng = ChaCha20Rng::seed_from_u64(*data_seed);
            let y = checkerboard(*rows, *cols, *amplitude).map(|a| {
                let z: f64 = StandardNormal.sample(&mut rng);
                a + noise * z
            });
            let mut m = build_nuclear(&y, *sigma, *alpha).map_err(config_err)?;
            if *residual == ResidualChoice::Exact {
                m = m.with_residual(Residual::Exact).map_err(config_err)?;
            }
            let zz = Rates::Bounds(m.zz_bounds());
            let bps = Rates::Bounds(vec![m.bps_bound()]);
            Ok(BuiltModel {
                start: m.observation().to_vec(),
                target: Box::new(m),
                marginal_cdf: None,
                exact_mean: None,
                image: None,
                zz,
                bps,
            })
        }
        ModelConfig::Tv {
            size,
            image,
            sigma,
            alpha,
            data_seed,
        } => {
            let (rows, cols, truth) = match image {
                Some(path) => {
                    let g = read_pgm(path)?;
                    (g.rows, g.cols, g.pixels)
                }
                None => (*size, *size, test_scene(*size, *size)),
            };
            let mut rng = ChaCha20Rng::seed_from_u64(*data_seed);
            let y = blur_and_noise(&truth, rows, cols, *sigma, &mut rng);
            let m = build_tv_deblur(y.clone(), (rows, cols), *sigma, *alpha).map_err(config_err)?;
            // the posterior is log-concave, so end-of-window rates bound it
            let convex = || Rates::Bounds(vec![BoundStrategy::convex_endpoint()]);
            Ok(BuiltModel {
                target: Box::new(m),
                start: y.clone(),
                marginal_cdf: None,
                exact_mean: None,
                image: Some(ImageTruth {
                    rows,
                    cols,
                    truth,
                    observation: y,
                }),
                zz: convex(),
                bps: convex(),
            })
        }
    }
}

fn strategies(rates: &Rates, choice: EventChoice, what: &str) -> CliResult<Vec<EventStrategy>> {
    match (rates, choice) {
        (Rates::Exact, EventChoice::Auto | EventChoice::Exact) => Ok(vec![EventStrategy::Exact]),
        (Rates::Bounds(b), EventChoice::Auto | EventChoice::Thinning) => {
            Ok(b.iter().cloned().map(EventStrategy::Thinning).collect())
        }
        (Rates::Exact, EventChoice::Thinning) => Ok(vec![EventStrategy::Thinning(
            BoundStrategy::convex_endpoint(),
        )]),
        (Rates::Bounds(_), EventChoice::Exact) => Err(CliError::Config(format!(
            "this model has no closed-form {what} rates; use events = \"thinning\""
        ))),
        (Rates::Unavailable, _) => Err(CliError::Config(format!(
            "this model provides no {what} event rates"
        ))),
    }
}

impl BuiltModel {
    pub fn dim(&self) -> usize {
        self.target.dim()
    }

    /// One strategy per coordinate, or a single shared one.
    pub fn zz_strategies(&self, choice: EventChoice) -> CliResult<Vec<EventStrategy>> {
        strategies(&self.zz, choice, "Zig-Zag")
    }

    pub fn bps_strategy(&self, choice: EventChoice) -> CliResult<EventStrategy> {
        Ok(strategies(&self.bps, choice, "bouncy particle")?.remove(0))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn every_model_builds_at_its_defaults() {
        let text = r#"
            [[m]]
            id = "laplace"
            dim = 3
            [[m]]
            id = "gaussian"
            dim = 3
            [[m]]
            id = "besselk"
            n_params = 8
            n_obs = 10
            n_signals = 2
            [[m]]
            id = "circular"
            [[m]]
            id = "nuclear"
            [[m]]
            id = "tv"
            size = 8
        "#;
        #[derive(serde::Deserialize)]
        struct List {
            m: Vec<ModelConfig>,
        }
        let list: List = toml::from_str(text).unwrap();
        let dims = [3, 3, 8, CIRCULAR_DIM, 16, 64];
        for (cfg, d) in list.m.iter().zip(dims) {
            let b = build_model(cfg).unwrap();
            assert_eq!(b.dim(), d, "{}", cfg.id());
            assert_eq!(b.start.len(), d);
            assert!(b.target.potential(&b.start).is_finite());
        }
    }

    #[test]
    fn gaussian_cdf_is_centred_and_scaled() {
        let cdf = normal_cdf(vec![1.0, 4.0]);
        assert!((cdf(0, 0.0) - 0.5).abs() < 1e-15);
        assert!((cdf(0, 1.0) - 0.841_344_746_068_543).abs() < 1e-9);
        assert!((cdf(1, 2.0) - 0.841_344_746_068_543).abs() < 1e-9);
    }

    #[test]
    fn impossible_event_choices_are_config_errors() {
        let b = build_model(&ModelConfig::Besselk {
            n_params: 4,
            n_obs: 6,
            n_signals: 1,
            magnitude: 1.0,
            data_seed: 1,
            p: None,
            eps: None,
        })
        .unwrap();
        assert!(b.bps_strategy(EventChoice::Auto).is_err());
        assert!(b.zz_strategies(EventChoice::Exact).is_err());
        assert_eq!(b.zz_strategies(EventChoice::Auto).unwrap().len(), 4);
    }
}
