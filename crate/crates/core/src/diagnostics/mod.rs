//! Chain quality metrics: autocorrelation, effective sample size,
//! Kolmogorov-Smirnov tests and image error measures.

mod acf;
mod image;
mod ks;

use serde::Serialize;

pub use acf::{acf_direct, acf_fft, ess, ess_series, EssEstimate};
pub use image::{image_metrics, ImageMetrics};
pub use ks::{kolmogorov_q, ks_one_sample, ks_test, ks_two_sample, KsResult};

use crate::chain::SampleChain;
use crate::error::{invalid, Result};

/// Per-coordinate mean, variance and mean absolute value.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MomentEstimates {
    pub mean: Vec<f64>,
    pub variance: Vec<f64>,
    pub abs_mean: Vec<f64>,
}

pub fn moments(chain: &SampleChain) -> Result<MomentEstimates> {
    let n = chain.len();
    if n == 0 {
        return invalid("empty chain");
    }
    let d = chain.dim();
    let mut mean = vec![0.0; d];
    let mut abs_mean = vec![0.0; d];
    for s in &chain.states {
        for i in 0..d {
            mean[i] += s[i];
            abs_mean[i] += s[i].abs();
        }
    }
    mean.iter_mut().for_each(|m| *m /= n as f64);
    abs_mean.iter_mut().for_each(|m| *m /= n as f64);
    let mut variance = vec![0.0; d];
    for s in &chain.states {
        for i in 0..d {
            variance[i] += (s[i] - mean[i]).powi(2);
        }
    }
    let denom = (n.max(2) - 1) as f64;
    variance.iter_mut().for_each(|v| *v /= denom);
    Ok(MomentEstimates {
        mean,
        variance,
        abs_mean,
    })
}

/// Summary written next to the samples of every run.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DiagnosticsReport {
    pub n_samples: usize,
    pub wall_time: f64,
    pub ess: Vec<f64>,
    pub ess_per_second: Vec<f64>,
    /// Coordinates whose chain never moved.
    pub degenerate: Vec<usize>,
    pub acf: Vec<Vec<f64>>,
    pub moments: MomentEstimates,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ks: Option<Vec<KsResult>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mse: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ssim: Option<f64>,
}

impl DiagnosticsReport {
    /// ESS, autocorrelations up to `max_lag` and moments of every coordinate.
    pub fn from_chain(chain: &SampleChain, max_lag: usize) -> Result<Self> {
        let d = chain.dim();
        let mut ess_v = Vec::with_capacity(d);
        let mut acfs = Vec::with_capacity(d);
        let mut degenerate = Vec::new();
        for i in 0..d {
            let x = chain.coordinate(i);
            let e = ess_series(&x)?;
            if e.degenerate {
                degenerate.push(i);
            }
            ess_v.push(e.ess);
            acfs.push(acf_fft(&x, max_lag.min(x.len() - 1)));
        }
        let ess_per_second = ess_v
            .iter()
            .map(|e| {
                if chain.wall_time > 0.0 {
                    e / chain.wall_time
                } else {
                    f64::INFINITY
                }
            })
            .collect();
        Ok(Self {
            n_samples: chain.len(),
            wall_time: chain.wall_time,
            ess: ess_v,
            ess_per_second,
            degenerate,
            acf: acfs,
            moments: moments(chain)?,
            ks: None,
            mse: None,
            ssim: None,
        })
    }
}
