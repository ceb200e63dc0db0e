//! Estimators of the mean-reversion rate `a` from a sampled path.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::simulate::Path;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Estimator {
    /// Least-squares based.
    Lsb,
    /// Davis–McCormick based; needs a strictly positive path.
    Dmb,
}

impl fmt::Display for Estimator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Estimator::Lsb => "lsb",
            Estimator::Dmb => "dmb",
        })
    }
}

impl FromStr for Estimator {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "lsb" => Ok(Estimator::Lsb),
            "dmb" => Ok(Estimator::Dmb),
            other => Err(Error::Parse(format!("unknown estimator '{other}' (lsb|dmb)"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RateEstimate {
    pub a_hat: f64,
    pub method: Estimator,
}

pub fn estimate(path: &Path, method: Estimator) -> Result<RateEstimate> {
    match method {
        Estimator::Lsb => lsb_estimate(path),
        Estimator::Dmb => dmb_estimate(path),
    }
}

/// Least-squares based estimate
///
/// ```text
/// â = Σ_{n=1}^{NM} (Y_{n-1} - Y_n)(Y_{n-1} - Ȳ) / ((1/M) Σ_{n=1}^{NM} (Y_{n-1} - Ȳ)²)
/// ```
///
/// where `Ȳ` averages `Y_1..Y_{NM}` (index 0 excluded) while both sums run over
/// the lagged values `Y_0..Y_{NM-1}`. The asymmetry is intentional; shifting
/// either range biases the estimate.
///
/// A negative estimate is returned as is (with a log warning): it signals a
/// path that does not mean-revert.
pub fn lsb_estimate(path: &Path) -> Result<RateEstimate> {
    let y = path.values();
    if y.len() < 2 {
        return Err(Error::Degenerate("LSB estimate needs at least two observations".into()));
    }
    let m = path.grid().per_period() as f64;
    let steps = y.len() - 1;
    let y_bar = y[1..].iter().sum::<f64>() / steps as f64;

    let mut num = 0.0;
    let mut den = 0.0;
    for w in y.windows(2) {
        let dev = w[0] - y_bar;
        num += (w[0] - w[1]) * dev;
        den += dev * dev;
    }
    let den = den / m;
    if !(den > 0.0) || !den.is_finite() {
        return Err(Error::Degenerate("LSB denominator is zero (constant path)".into()));
    }
    let a_hat = num / den;
    if a_hat < 0.0 {
        log::warn!("LSB estimate is negative ({a_hat}); the path does not look mean-reverting");
    }
    Ok(RateEstimate { a_hat, method: Estimator::Lsb })
}

/// Davis–McCormick based estimate `â = max_{0<=n<NM} M·ln(Y_n / Y_{n+1})`.
pub fn dmb_estimate(path: &Path) -> Result<RateEstimate> {
    let y = path.values();
    if y.len() < 2 {
        return Err(Error::Degenerate("DMB estimate needs at least two observations".into()));
    }
    if let Some((index, &value)) = y.iter().enumerate().find(|(_, &v)| !(v > 0.0)) {
        return Err(Error::NonPositivePath { index, value });
    }
    let m = path.grid().per_period() as f64;
    let max_log_ratio = y
        .windows(2)
        .map(|w| (w[0] / w[1]).ln())
        .fold(f64::NEG_INFINITY, f64::max);
    Ok(RateEstimate { a_hat: m * max_log_ratio, method: Estimator::Dmb })
}
