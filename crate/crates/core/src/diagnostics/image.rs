use crate::error::{invalid, Result};

/// Error of an image estimate against a reference.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ImageMetrics {
    pub mse: f64,
    pub ssim: f64,
}

/// Mean squared error and single-window SSIM with the usual constants
/// `K1 = 0.01`, `K2 = 0.03` and dynamic range taken from the reference
/// (1 for a flat reference).
pub fn image_metrics(estimate: &[f64], reference: &[f64]) -> Result<ImageMetrics> {
    if estimate.len() != reference.len() {
        return invalid(format!(
            "image sizes differ: {} vs {}",
            estimate.len(),
            reference.len()
        ));
    }
    if estimate.is_empty() {
        return invalid("empty images");
    }
    let n = estimate.len() as f64;
    let mse = estimate
        .iter()
        .zip(reference)
        .map(|(a, b)| (a - b).powi(2))
        .sum::<f64>()
        / n;
    let (lo, hi) = reference
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), &r| (l.min(r), h.max(r)));
    let range = if hi > lo { hi - lo } else { 1.0 };
    let c1 = (0.01 * range).powi(2);
    let c2 = (0.03 * range).powi(2);
    let mx = estimate.iter().sum::<f64>() / n;
    let my = reference.iter().sum::<f64>() / n;
    let (mut vx, mut vy, mut cxy) = (0.0, 0.0, 0.0);
    for (a, b) in estimate.iter().zip(reference) {
        vx += (a - mx) * (a - mx);
        vy += (b - my) * (b - my);
        cxy += (a - mx) * (b - my);
    }
    vx /= n;
    vy /= n;
    cxy /= n;
    let ssim = ((2.0 * mx * my + c1) * (2.0 * cxy + c2))
        / ((mx * mx + my * my + c1) * (vx + vy + c2));
    Ok(ImageMetrics { mse, ssim })
}
