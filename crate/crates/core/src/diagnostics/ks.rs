//! One-sample Kolmogorov–Smirnov test against a χ² law.

use statrs::function::gamma::gamma_lr;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KsResult {
    pub statistic: f64,
    pub p_value: f64,
    pub n: usize,
}

pub fn chisq_cdf(x: f64, df: f64) -> f64 {
    if x <= 0.0 {
        0.0
    } else if x.is_infinite() {
        1.0
    } else {
        gamma_lr(df / 2.0, x / 2.0)
    }
}

/// Survival function of the Kolmogorov distribution,
/// Q(λ) = 2 Σ (−1)^{k−1} exp(−2k²λ²).
pub fn kolmogorov_sf(lambda: f64) -> f64 {
    if lambda < 0.2 {
        return 1.0;
    }
    let mut sum = 0.0;
    let mut sign = 1.0;
    for k in 1..=200 {
        let kf = k as f64;
        let term = (-2.0 * kf * kf * lambda * lambda).exp();
        sum += sign * term;
        if term < 1e-18 {
            break;
        }
        sign = -sign;
    }
    (2.0 * sum).clamp(0.0, 1.0)
}

/// D = sup |F_n − F| for a continuous cdf.
pub fn ks_statistic(sample: &[f64], cdf: impl Fn(f64) -> f64) -> f64 {
    let mut xs = sample.to_vec();
    xs.sort_by(f64::total_cmp);
    let n = xs.len() as f64;
    xs.iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = cdf(x);
            ((i + 1) as f64 / n - f).max(f - i as f64 / n)
        })
        .fold(0.0, f64::max)
}

/// Asymptotic p-value with Stephens' small-sample scaling of √n·D.
pub fn ks_p_value(d: f64, n: usize) -> f64 {
    let rn = (n as f64).sqrt();
    kolmogorov_sf((rn + 0.12 + 0.11 / rn) * d)
}

pub fn ks_test(sample: &[f64], cdf: impl Fn(f64) -> f64) -> Result<KsResult> {
    if sample.is_empty() {
        return Err(Error::Domain("KS test needs a nonempty sample".into()));
    }
    if sample.iter().any(|x| x.is_nan()) {
        return Err(Error::Domain("KS sample contains NaN".into()));
    }
    let statistic = ks_statistic(sample, cdf);
    Ok(KsResult {
        statistic,
        p_value: ks_p_value(statistic, sample.len()),
        n: sample.len(),
    })
}

pub fn ks_test_chisq(sample: &[f64], df: f64) -> Result<KsResult> {
    if !(df > 0.0 && df.is_finite()) {
        return Err(Error::Domain(format!(
            "χ² degrees of freedom must be positive, got {df}"
        )));
    }
    if sample.iter().any(|&x| x < 0.0) {
        return Err(Error::Domain("χ² sample has negative values".into()));
    }
    ks_test(sample, |x| chisq_cdf(x, df))
}
