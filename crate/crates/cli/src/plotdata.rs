//! The `emit-plotdata` verb: columnar text files for external plotting.

use std::fmt::Write as _;
use std::path::Path;

use nonsmooth_mcmc::diagnostics::acf_fft;

use crate::error::{CliError, CliResult};

/// Histograms, traces and autocorrelations are written for these
/// coordinates unless told otherwise.
pub const DEFAULT_PLOT_COORDS: usize = 16;

pub fn default_coords(dim: usize) -> Vec<usize> {
    (0..dim.min(DEFAULT_PLOT_COORDS)).collect()
}

/// Equal-width bins over `[min, max]` as `(lower, upper, count)`; the top
/// edge belongs to the last bin, so the counts add up to `x.len()`.
pub fn histogram(x: &[f64], bins: usize) -> Vec<(f64, f64, usize)> {
    let bins = bins.max(1);
    let lo = x.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = x.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if x.is_empty() {
        return Vec::new();
    }
    let width = if hi > lo { (hi - lo) / bins as f64 } else { 1.0 };
    let mut counts = vec![0usize; bins];
    for v in x {
        let k = (((v - lo) / width) as usize).min(bins - 1);
        counts[k] += 1;
    }
    counts
        .into_iter()
        .enumerate()
        .map(|(k, c)| (lo + k as f64 * width, lo + (k + 1) as f64 * width, c))
        .collect()
}

pub fn write_histogram(path: &Path, x: &[f64], bins: usize) -> CliResult<()> {
    let mut out = String::from("lower,upper,count\n");
    for (a, b, c) in histogram(x, bins) {
        let _ = writeln!(out, "{a},{b},{c}");
    }
    std::fs::write(path, out).map_err(CliError::io(path))
}

/// Rows of `samples.csv` without the header.
pub fn read_samples(path: &Path) -> CliResult<Vec<Vec<f64>>> {
    let text = std::fs::read_to_string(path)
        .map_err(|_| CliError::MissingArtifact(path.display().to_string()))?;
    let mut lines = text.lines();
    let width = lines
        .next()
        .ok_or_else(|| CliError::MissingArtifact(format!("{} is empty", path.display())))?
        .split(',')
        .count();
    lines
        .enumerate()
        .map(|(r, line)| {
            let row: Result<Vec<f64>, _> = line.split(',').map(str::parse).collect();
            match row {
                Ok(row) if row.len() == width => Ok(row),
                _ => Err(CliError::MissingArtifact(format!(
                    "{} is malformed at data row {}",
                    path.display(),
                    r + 1
                ))),
            }
        })
        .collect()
}

/// Writes `trace_<i>.csv`, `acf_<i>.csv` and `histogram_<i>.csv` next to
/// the samples of a finished run.
pub fn emit_plotdata(dir: &Path, coords: Option<&[usize]>, bins: usize, max_lag: usize) -> CliResult<usize> {
    let rows = read_samples(&dir.join("samples.csv"))?;
    if rows.is_empty() {
        return Err(CliError::MissingArtifact(format!("{} holds no samples", dir.display())));
    }
    let dim = rows[0].len();
    let coords = coords.map_or_else(|| default_coords(dim), <[usize]>::to_vec);
    for &i in &coords {
        if i >= dim {
            return Err(CliError::Config(format!("coordinate {i} out of range (dimension {dim})")));
        }
        let x: Vec<f64> = rows.iter().map(|r| r[i]).collect();
        let mut trace = String::from("step,value\n");
        for (k, v) in x.iter().enumerate() {
            let _ = writeln!(trace, "{k},{v}");
        }
        let path = dir.join(format!("trace_{i}.csv"));
        std::fs::write(&path, trace).map_err(CliError::io(&path))?;

        let mut acf = String::from("lag,acf\n");
        for (k, r) in acf_fft(&x, max_lag.min(x.len() - 1)).iter().enumerate() {
            let _ = writeln!(acf, "{k},{r}");
        }
        let path = dir.join(format!("acf_{i}.csv"));
        std::fs::write(&path, acf).map_err(CliError::io(&path))?;

        write_histogram(&dir.join(format!("histogram_{i}.csv")), &x, bins)?;
    }
    Ok(coords.len())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn histogram_counts_every_value_once() {
        let x: Vec<f64> = (0..=100).map(|k| (k as f64 * 0.37).sin()).collect();
        let h = histogram(&x, 7);
        assert_eq!(h.len(), 7);
        assert_eq!(h.iter().map(|b| b.2).sum::<usize>(), x.len());
        assert!((h[6].1 - x.iter().copied().fold(f64::MIN, f64::max)).abs() < 1e-12);
    }

    #[test]
    fn constant_values_fill_one_bin() {
        let h = histogram(&[2.0; 5], 3);
        assert_eq!(h[0].2, 5);
    }
}
