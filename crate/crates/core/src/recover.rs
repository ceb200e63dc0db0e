//! Recovery of the unit-interval driving increments from a sampled path.

use serde::{Deserialize, Serialize};

use crate::error::{domain, Result};
use crate::simulate::Path;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IncrementSeries {
    values: Vec<f64>,
    pub a_used: f64,
    pub sigma_used: f64,
}

impl IncrementSeries {
    /// Wraps increments that did not come from [`recover_increments`] (files, tests).
    pub fn from_values(values: Vec<f64>) -> Self {
        Self { values, a_used: f64::NAN, sigma_used: 1.0 }
    }

    #[inline]
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// Trapezoidal reconstruction of `ΔL_n = L(n) - L(n-1)`, `n = 1..=N`:
///
/// ```text
/// ΔL̂_n = (â/(Mσ)) Σ_{i=(n-1)M+1}^{nM} Y_{i/M} + (1/σ - â/(2Mσ)) (Y_n - Y_{n-1})
/// ```
pub fn recover_increments(path: &Path, a_hat: f64, sigma: f64) -> Result<IncrementSeries> {
    if !(sigma > 0.0) || !sigma.is_finite() {
        return domain(format!("sigma must be positive, got {sigma}"));
    }
    if !a_hat.is_finite() {
        return domain(format!("rate estimate must be finite, got {a_hat}"));
    }
    let grid = path.grid();
    let m = grid.per_period();
    let y = path.values();
    if y.len() != grid.len() {
        return domain("path length does not match its grid");
    }
    let mf = m as f64;
    let sum_weight = a_hat / (mf * sigma);
    let diff_weight = 1.0 / sigma - a_hat / (2.0 * mf * sigma);
    let values = (1..=grid.n_periods())
        .map(|n| {
            let start = (n - 1) * m;
            let end = n * m;
            let window: f64 = y[start + 1..=end].iter().sum();
            sum_weight * window + diff_weight * (y[end] - y[start])
        })
        .collect();
    Ok(IncrementSeries { values, a_used: a_hat, sigma_used: sigma })
}
