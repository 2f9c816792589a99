//! Krippendorff's α for two raters under the interval metric.

use rand::Rng;

use crate::error::{Error, Result};
use crate::rng::{Purpose, StreamKey};

pub const DEFAULT_RESAMPLES: usize = 1000;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AlphaResult {
    pub alpha: f64,
    /// Percentile bootstrap 95% interval over units.
    pub ci: (f64, f64),
    /// Resamples with zero pooled variance, left out of the interval.
    pub degenerate_resamples: usize,
}

/// α = 1 − D_o/D_e. D_o is the mean of (x_u − y_u)² over units and D_e the
/// mean squared difference over the 2N(2N−1) ordered pairs of pooled values.
pub fn alpha_point(x: &[f64], y: &[f64]) -> Result<f64> {
    alpha_indexed(x, y, (0..x.len()).map(|i| i))
}

fn alpha_indexed(x: &[f64], y: &[f64], units: impl Iterator<Item = usize> + Clone) -> Result<f64> {
    let n = units.clone().count();
    let m = 2.0 * n as f64;
    let mut d_o = 0.0;
    let mut sum = 0.0;
    for u in units.clone() {
        d_o += (x[u] - y[u]).powi(2);
        sum += x[u] + y[u];
    }
    d_o /= n as f64;
    let mean = sum / m;
    let ss: f64 = units
        .map(|u| (x[u] - mean).powi(2) + (y[u] - mean).powi(2))
        .sum();
    // Σ_{i≠j} (v_i − v_j)² = 2M·SS over the M pooled values.
    let d_e = 2.0 * ss / (m - 1.0);
    if !(d_e > 0.0) {
        return Err(Error::Domain("pooled values have zero variance".into()));
    }
    Ok(1.0 - d_o / d_e)
}

pub fn krippendorff_alpha(
    x: &[f64],
    y: &[f64],
    resamples: usize,
    seed: u64,
) -> Result<AlphaResult> {
    if x.len() != y.len() {
        return Err(Error::Dimension {
            expected: x.len(),
            got: y.len(),
        });
    }
    if x.len() < 2 {
        return Err(Error::Domain("need at least two units".into()));
    }
    let alpha = alpha_point(x, y)?;
    let n = x.len();
    let mut rng = StreamKey::new(seed, Purpose::Resample, 0).rng();
    let mut draws = Vec::with_capacity(resamples);
    let mut idx = vec![0usize; n];
    for _ in 0..resamples {
        for slot in idx.iter_mut() {
            *slot = rng.random_range(0..n);
        }
        if let Ok(a) = alpha_indexed(x, y, idx.iter().copied()) {
            draws.push(a);
        }
    }
    let degenerate_resamples = resamples - draws.len();
    draws.sort_by(f64::total_cmp);
    let ci = if draws.is_empty() {
        (f64::NAN, f64::NAN)
    } else {
        (percentile(&draws, 0.025), percentile(&draws, 0.975))
    };
    Ok(AlphaResult {
        alpha,
        ci,
        degenerate_resamples,
    })
}

/// Linear interpolation between order statistics of a sorted slice.
fn percentile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (pos - lo as f64) * (sorted[hi] - sorted[lo])
}
