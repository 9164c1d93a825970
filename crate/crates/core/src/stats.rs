//! Reference CDFs and Kolmogorov-Smirnov distances.

use serde::Serialize;

use crate::error::{Error, Result};

/// `Phi((x - mean) / sqrt(variance))`.
pub fn gaussian_cdf(x: f64, mean: f64, variance: f64) -> f64 {
    let z = (x - mean) / (2.0 * variance).sqrt();
    0.5 * libm::erfc(-z)
}

/// CDF of the semicircle law on `[-2 sigma, 2 sigma]`.
pub fn semicircle_cdf(x: f64, sigma: f64) -> f64 {
    let r = 2.0 * sigma;
    if x <= -r {
        return 0.0;
    }
    if x >= r {
        return 1.0;
    }
    0.5 + x * (r * r - x * x).sqrt() / (4.0 * std::f64::consts::PI * sigma * sigma)
        + (x / r).asin() / std::f64::consts::PI
}

pub fn semicircle_density(x: f64, sigma: f64) -> f64 {
    let r2 = 4.0 * sigma * sigma;
    if x * x >= r2 {
        0.0
    } else {
        (r2 - x * x).sqrt() / (2.0 * std::f64::consts::PI * sigma * sigma)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum KsMode {
    OneSampleGaussian,
    OneSampleSemicircle,
    OneSample,
    TwoSample,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct KsResult {
    pub statistic: f64,
    /// `n` for one sample, `n m / (n + m)` for two.
    pub n_effective: f64,
    pub mode: KsMode,
}

fn sorted(sample: &[f64]) -> Result<Vec<f64>> {
    if sample.is_empty() {
        return Err(Error::EmptyInput);
    }
    if sample.iter().any(|x| x.is_nan()) {
        return Err(Error::Domain("sample contains NaN".into()));
    }
    let mut s = sample.to_vec();
    s.sort_by(f64::total_cmp);
    Ok(s)
}

/// `sup_x |F_n(x) - F(x)|` for a continuous reference `F`.
pub fn ks_one_sample(sample: &[f64], cdf: impl Fn(f64) -> f64, mode: KsMode) -> Result<KsResult> {
    let s = sorted(sample)?;
    let n = s.len() as f64;
    let mut d = 0.0f64;
    for (i, &x) in s.iter().enumerate() {
        let f = cdf(x);
        d = d.max((i + 1) as f64 / n - f).max(f - i as f64 / n);
    }
    Ok(KsResult { statistic: d.clamp(0.0, 1.0), n_effective: n, mode })
}

/// `sup_x |F_a(x) - F_b(x)|` between two empirical CDFs; ties handled by
/// advancing past equal values in both samples before comparing.
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> Result<KsResult> {
    let (a, b) = (sorted(a)?, sorted(b)?);
    let (na, nb) = (a.len(), b.len());
    let (mut i, mut j) = (0, 0);
    let mut d = 0.0f64;
    while i < na && j < nb {
        let x = a[i].min(b[j]);
        while i < na && a[i] <= x {
            i += 1;
        }
        while j < nb && b[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / na as f64 - j as f64 / nb as f64).abs());
    }
    Ok(KsResult {
        statistic: d,
        n_effective: (na * nb) as f64 / (na + nb) as f64,
        mode: KsMode::TwoSample,
    })
}

/// Mean and standard error of the mean.
pub fn mean_and_se(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    if xs.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, f64::INFINITY);
    }
    let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}
