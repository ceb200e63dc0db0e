//! Uncorrelatedness test on recovered increments: sample moments, lag-k
//! autocovariance, the standardized statistic `W = √N γ̂(k) / η̂²` and the
//! two-sided normal decision.

use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::special::std_normal_quantile;

pub const DEFAULT_ALPHA: f64 = 0.05;
pub const DEFAULT_LAG: usize = 1;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SampleMoments {
    pub mean: f64,
    /// Divisor `N`.
    pub eta2_hat: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WhitenessResult {
    pub w_stat: f64,
    pub lag: usize,
    pub n: usize,
    pub eta2_hat: f64,
    pub gamma_hat: f64,
    pub alpha: f64,
    pub critical: f64,
    pub reject: bool,
}

pub fn sample_moments(x: &[f64]) -> Result<SampleMoments> {
    if x.len() < 2 {
        return domain(format!("sample moments need at least 2 values, got {}", x.len()));
    }
    let n = x.len() as f64;
    let mean = x.iter().sum::<f64>() / n;
    let eta2_hat = x.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    Ok(SampleMoments { mean, eta2_hat })
}

/// `γ̂(k) = (1/(N-k)) Σ_{n=1}^{N-k} (x_{n+k} - x̄)(x_n - x̄)`, `x̄` the full-sample mean.
pub fn sample_autocov(x: &[f64], k: usize) -> Result<f64> {
    let mean = sample_moments(x)?.mean;
    autocov_about(x, mean, k)
}

fn autocov_about(x: &[f64], mean: f64, k: usize) -> Result<f64> {
    let n = x.len();
    if k == 0 || k >= n {
        return domain(format!("lag must satisfy 1 <= k <= N-1 = {}, got {k}", n.saturating_sub(1)));
    }
    let s: f64 = x[k..].iter().zip(x).map(|(a, b)| (a - mean) * (b - mean)).sum();
    Ok(s / (n - k) as f64)
}

/// `W(k)` and the decision `|W| > z_{1-α/2}`.
pub fn w_statistic(x: &[f64], k: usize, alpha: f64) -> Result<WhitenessResult> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return domain(format!("alpha must lie in (0, 1), got {alpha}"));
    }
    let moments = sample_moments(x)?;
    if !(moments.eta2_hat > 0.0) {
        return Err(Error::Degenerate("recovered increments are constant (zero sample variance)".into()));
    }
    let gamma_hat = autocov_about(x, moments.mean, k)?;
    let n = x.len();
    let w_stat = (n as f64).sqrt() * gamma_hat / moments.eta2_hat;
    let critical = std_normal_quantile(1.0 - alpha / 2.0)?;
    Ok(WhitenessResult {
        w_stat,
        lag: k,
        n,
        eta2_hat: moments.eta2_hat,
        gamma_hat,
        alpha,
        critical,
        reject: w_stat.abs() > critical,
    })
}

/// Sample autocorrelations `γ̂(k)/γ̂(0)` for `k = 0..=max_lag`, with `γ̂(0) = η̂²`.
pub fn acf(x: &[f64], max_lag: usize) -> Result<Vec<f64>> {
    let moments = sample_moments(x)?;
    if !(moments.eta2_hat > 0.0) {
        return Err(Error::Degenerate("autocorrelation of a constant series".into()));
    }
    if max_lag >= x.len() {
        return domain(format!("max lag {max_lag} must be below N = {}", x.len()));
    }
    let mut out = Vec::with_capacity(max_lag + 1);
    out.push(1.0);
    for k in 1..=max_lag {
        out.push(autocov_about(x, moments.mean, k)? / moments.eta2_hat);
    }
    Ok(out)
}
