#![allow(dead_code)]

use levy_car1::special::ks_pvalue;

/// Two-sample KS distance `sup |F_x - F_y|`.
pub fn ks_two_sample(x: &[f64], y: &[f64]) -> f64 {
    let mut x = x.to_vec();
    let mut y = y.to_vec();
    x.sort_by(f64::total_cmp);
    y.sort_by(f64::total_cmp);
    let (nx, ny) = (x.len() as f64, y.len() as f64);
    let (mut i, mut j, mut d) = (0, 0, 0.0f64);
    while i < x.len() && j < y.len() {
        let t = x[i].min(y[j]);
        while i < x.len() && x[i] <= t {
            i += 1;
        }
        while j < y.len() && y[j] <= t {
            j += 1;
        }
        d = d.max((i as f64 / nx - j as f64 / ny).abs());
    }
    d
}

/// Asymptotic two-sample p-value with effective size `n m / (n + m)`.
pub fn ks_two_sample_pvalue(x: &[f64], y: &[f64]) -> f64 {
    let d = ks_two_sample(x, y);
    let n_eff = (x.len() * y.len()) / (x.len() + y.len());
    ks_pvalue(d, n_eff).unwrap().get()
}

pub fn mean_var(x: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let m = x.iter().sum::<f64>() / n;
    (m, x.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / (n - 1.0))
}
