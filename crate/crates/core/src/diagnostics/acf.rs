use rustfft::num_complex::Complex;
use rustfft::FftPlanner;

use crate::chain::SampleChain;
use crate::error::{Error, Result};

fn centred(x: &[f64]) -> (Vec<f64>, f64) {
    let n = x.len() as f64;
    let m = x.iter().sum::<f64>() / n;
    let c: Vec<f64> = x.iter().map(|a| a - m).collect();
    let var = c.iter().map(|a| a * a).sum::<f64>() / n;
    (c, var)
}

/// Autocorrelations `rho_0..=rho_max_lag` by direct summation.
pub fn acf_direct(x: &[f64], max_lag: usize) -> Vec<f64> {
    let n = x.len();
    let (c, var) = centred(x);
    let lags = max_lag.min(n.saturating_sub(1));
    (0..=lags)
        .map(|k| {
            if var == 0.0 {
                return if k == 0 { 1.0 } else { 0.0 };
            }
            let s: f64 = c[..n - k].iter().zip(&c[k..]).map(|(a, b)| a * b).sum();
            s / n as f64 / var
        })
        .collect()
}

/// Same as [`acf_direct`], through a zero-padded FFT.
pub fn acf_fft(x: &[f64], max_lag: usize) -> Vec<f64> {
    let n = x.len();
    let (c, var) = centred(x);
    let lags = max_lag.min(n.saturating_sub(1));
    if var == 0.0 {
        return (0..=lags).map(|k| if k == 0 { 1.0 } else { 0.0 }).collect();
    }
    let m = (2 * n).next_power_of_two();
    let mut buf: Vec<Complex<f64>> = c
        .iter()
        .map(|&a| Complex::new(a, 0.0))
        .chain(std::iter::repeat(Complex::new(0.0, 0.0)))
        .take(m)
        .collect();
    let mut planner = FftPlanner::new();
    planner.plan_fft_forward(m).process(&mut buf);
    for z in buf.iter_mut() {
        *z = Complex::new(z.norm_sqr(), 0.0);
    }
    planner.plan_fft_inverse(m).process(&mut buf);
    let scale = buf[0].re;
    (0..=lags).map(|k| buf[k].re / scale).collect()
}

/// Effective sample size of one coordinate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EssEstimate {
    pub ess: f64,
    /// Integrated autocorrelation time `N / ess`.
    pub tau: f64,
    /// Set when the chain is constant; `ess` is then 1.
    pub degenerate: bool,
}

/// Geyer's initial monotone sequence estimator.
pub fn ess_series(x: &[f64]) -> Result<EssEstimate> {
    let n = x.len();
    if n < 100 {
        return Err(Error::InsufficientData(format!(
            "effective sample size needs at least 100 states, got {n}"
        )));
    }
    if x.iter().all(|a| *a == x[0]) {
        return Ok(EssEstimate {
            ess: 1.0,
            tau: n as f64,
            degenerate: true,
        });
    }
    let rho = acf_fft(x, n - 1);
    let mut sum = 0.0;
    let mut prev = f64::INFINITY;
    let mut k = 0;
    while 2 * k + 1 < rho.len() {
        let gamma = rho[2 * k] + rho[2 * k + 1];
        if gamma <= 0.0 {
            break;
        }
        let g = gamma.min(prev);
        sum += g;
        prev = g;
        k += 1;
    }
    let tau = (2.0 * sum - 1.0).max(1.0);
    Ok(EssEstimate {
        ess: n as f64 / tau,
        tau,
        degenerate: false,
    })
}

pub fn ess(chain: &SampleChain, coord: usize) -> Result<EssEstimate> {
    if coord >= chain.dim() {
        return Err(Error::InvalidArgument(format!(
            "coordinate {coord} out of range"
        )));
    }
    ess_series(&chain.coordinate(coord))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    fn ar1(phi: f64, n: usize, seed: u64) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut x = 0.0;
        let s = (1.0 - phi * phi).sqrt();
        (0..n)
            .map(|_| {
                let z: f64 = rng.sample(StandardNormal);
                x = phi * x + s * z;
                x
            })
            .collect()
    }

    #[test]
    fn iid_draws_have_full_ess() {
        let x = ar1(0.0, 100_000, 1);
        let e = ess_series(&x).unwrap();
        assert!(e.ess > 90_000.0 && e.ess <= 110_000.0, "{e:?}");
    }

    #[test]
    fn ar1_ess_matches_integrated_autocorrelation() {
        let n = 200_000;
        let x = ar1(0.9, n, 2);
        let e = ess_series(&x).unwrap();
        let target = n as f64 * 0.1 / 1.9;
        assert!((e.ess / target - 1.0).abs() < 0.2, "{} vs {target}", e.ess);
    }

    #[test]
    fn constant_chain_is_flagged() {
        let e = ess_series(&[3.0; 500]).unwrap();
        assert_eq!((e.ess, e.degenerate), (1.0, true));
        assert!(ess_series(&[0.0; 10]).is_err());
    }

    #[test]
    fn fft_and_direct_autocorrelations_agree() {
        let x = ar1(0.7, 5_000, 3);
        let a = acf_direct(&x, 200);
        let b = acf_fft(&x, 200);
        assert_eq!(a[0], 1.0);
        for (p, q) in a.iter().zip(&b) {
            assert!((p - q).abs() < 1e-10);
        }
    }

    #[test]
    fn ess_is_affine_invariant() {
        let x = ar1(0.5, 10_000, 4);
        let y: Vec<f64> = x.iter().map(|a| 3.0 * a - 7.0).collect();
        let (a, b) = (ess_series(&x).unwrap().ess, ess_series(&y).unwrap().ess);
        assert!((a - b).abs() < 1e-6 * a);
    }
}
