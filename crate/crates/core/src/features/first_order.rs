//! First-order intensity statistics of an artery region.

use crate::error::{Error, Result};

/// Histogram bins used by entropy and uniformity.
pub const HISTOGRAM_BINS: usize = 32;

pub const NAMES: [&str; 18] = [
    "energy",
    "entropy",
    "minimum",
    "p10",
    "p90",
    "maximum",
    "mean",
    "median",
    "interquartile_range",
    "range",
    "mean_absolute_deviation",
    "robust_mean_absolute_deviation",
    "root_mean_squared",
    "skewness",
    "kurtosis",
    "variance",
    "uniformity",
    "total_energy",
];

/// Linear-interpolated percentile of sorted data, `q` in [0, 1].
pub fn percentile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

/// Eighteen statistics in [`NAMES`] order. Moments are population moments;
/// skewness and kurtosis are 0 when the variance is 0. `pixel_spacing`
/// scales total energy by the pixel area.
pub fn first_order_features(values: &[f64], pixel_spacing: f64) -> Result<[f64; 18]> {
    if values.is_empty() {
        return Err(Error::InvalidInput("first-order features need a nonempty region".into()));
    }
    let n = values.len() as f64;
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let (min, max) = (sorted[0], sorted[sorted.len() - 1]);
    let mean = values.iter().sum::<f64>() / n;
    let energy = values.iter().map(|v| v * v).sum::<f64>();
    let m2 = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    let m3 = values.iter().map(|v| (v - mean).powi(3)).sum::<f64>() / n;
    let m4 = values.iter().map(|v| (v - mean).powi(4)).sum::<f64>() / n;
    let (skew, kurt) = if m2 > 0.0 { (m3 / m2.powf(1.5), m4 / (m2 * m2)) } else { (0.0, 0.0) };

    let mut hist = [0usize; HISTOGRAM_BINS];
    for &v in values {
        hist[bin(v, min, max, HISTOGRAM_BINS)] += 1;
    }
    let mut entropy = 0.0;
    let mut uniformity = 0.0;
    for &c in &hist {
        let p = c as f64 / n;
        if c > 0 {
            entropy -= p * p.log2();
        }
        uniformity += p * p;
    }

    let p10 = percentile(&sorted, 0.10);
    let p90 = percentile(&sorted, 0.90);
    let mad = values.iter().map(|v| (v - mean).abs()).sum::<f64>() / n;
    let robust: Vec<f64> = values.iter().copied().filter(|&v| v >= p10 && v <= p90).collect();
    let rmean = robust.iter().sum::<f64>() / robust.len() as f64;
    let rmad = robust.iter().map(|v| (v - rmean).abs()).sum::<f64>() / robust.len() as f64;

    Ok([
        energy,
        entropy,
        min,
        p10,
        p90,
        max,
        mean,
        percentile(&sorted, 0.5),
        percentile(&sorted, 0.75) - percentile(&sorted, 0.25),
        max - min,
        mad,
        rmad,
        (energy / n).sqrt(),
        skew,
        kurt,
        m2,
        uniformity,
        energy * pixel_spacing * pixel_spacing,
    ])
}

/// Zero-based bin of `v` among `bins` equal bins spanning `[min, max]`.
pub(crate) fn bin(v: f64, min: f64, max: f64, bins: usize) -> usize {
    if max <= min {
        return 0;
    }
    (((v - min) / (max - min) * bins as f64).floor() as usize).min(bins - 1)
}
