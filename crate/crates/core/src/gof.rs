//! Goodness-of-fit tests for the driving family of the recovered increments.
//!
//! Procedure 1 (Brownian motion): one nonparametric bootstrap resample supplies
//! the normal mean and standard deviation, and a one-sample KS test is run on
//! the original increments against that normal law.
//!
//! Procedure 2 (Normal, Gamma, Inverse Gaussian): moment fit, the statistic
//! `D_N` on the probability-integral transforms, and a parametric bootstrap of
//! `D_N` (refitting on each replicate) for the critical value.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::rng::{derive_stream, GammaSampler, InverseGaussianSampler, Seed, Stream};
use crate::special::{ks_pvalue, ln_phi, lower_gamma_p, phi, Probability};
use crate::whiteness::sample_moments;

pub const DEFAULT_BOOTSTRAP: usize = 1000;
/// Redraws allowed per bootstrap replicate whose refit fails.
const MAX_ATTEMPTS_PER_REPLICATE: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    Normal,
    Gamma,
    InverseGaussian,
}

impl Family {
    pub fn as_flag(self) -> &'static str {
        match self {
            Family::Normal => "normal",
            Family::Gamma => "gamma",
            Family::InverseGaussian => "ig",
        }
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_flag())
    }
}

impl FromStr for Family {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "normal" | "bm" => Ok(Family::Normal),
            "gamma" => Ok(Family::Gamma),
            "ig" | "inverse_gaussian" => Ok(Family::InverseGaussian),
            other => Err(Error::Parse(format!("unknown family '{other}' (normal|gamma|ig)"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum FamilyFit {
    Normal { mean: f64, sd: f64 },
    Gamma { shape: f64, scale: f64 },
    InverseGaussian { mean: f64, shape: f64 },
}

impl FamilyFit {
    pub fn family(&self) -> Family {
        match self {
            FamilyFit::Normal { .. } => Family::Normal,
            FamilyFit::Gamma { .. } => Family::Gamma,
            FamilyFit::InverseGaussian { .. } => Family::InverseGaussian,
        }
    }

    /// Unchecked CDF; the fit is valid by construction.
    fn cdf(&self, x: f64) -> f64 {
        match *self {
            FamilyFit::Normal { mean, sd } => phi((x - mean) / sd),
            FamilyFit::Gamma { shape, scale } => {
                if x <= 0.0 {
                    0.0
                } else {
                    lower_gamma_p(shape, x / scale)
                }
            }
            FamilyFit::InverseGaussian { mean, shape } => {
                if x <= 0.0 {
                    return 0.0;
                }
                let r = (shape / x).sqrt();
                let first = phi(r * (x / mean - 1.0));
                // e^{2λ/m} overflows long before the product does.
                let second = (2.0 * shape / mean + ln_phi(-r * (x / mean + 1.0))).exp();
                (first + second).clamp(0.0, 1.0)
            }
        }
    }
}

/// Method-of-moments fit from the sample mean `m` and divisor-`N` variance `s²`.
pub fn fit_moments(x: &[f64], family: Family) -> Result<FamilyFit> {
    let moments = sample_moments(x).map_err(|e| Error::Fit(e.to_string()))?;
    fit_from_moments(moments.mean, moments.eta2_hat, family)
}

fn fit_from_moments(m: f64, s2: f64, family: Family) -> Result<FamilyFit> {
    if !(s2 > 0.0) || !s2.is_finite() || !m.is_finite() {
        return Err(Error::Fit(format!("sample variance must be positive and finite, got {s2}")));
    }
    match family {
        Family::Normal => Ok(FamilyFit::Normal { mean: m, sd: s2.sqrt() }),
        Family::Gamma | Family::InverseGaussian if !(m > 0.0) => Err(Error::Fit(format!(
            "{family} fit needs a positive sample mean, got {m}"
        ))),
        Family::Gamma => Ok(FamilyFit::Gamma { shape: m * m / s2, scale: s2 / m }),
        Family::InverseGaussian => Ok(FamilyFit::InverseGaussian { mean: m, shape: m * m * m / s2 }),
    }
}

pub fn family_cdf(fit: &FamilyFit, x: f64) -> Probability {
    Probability::clamped(fit.cdf(x))
}

enum FitSampler {
    Normal { mean: f64, sd: f64 },
    Gamma(GammaSampler),
    InverseGaussian(InverseGaussianSampler),
}

impl FitSampler {
    fn new(fit: &FamilyFit) -> Result<Self> {
        Ok(match *fit {
            FamilyFit::Normal { mean, sd } => FitSampler::Normal { mean, sd },
            FamilyFit::Gamma { shape, scale } => FitSampler::Gamma(GammaSampler::new(shape, scale)?),
            FamilyFit::InverseGaussian { mean, shape } => {
                FitSampler::InverseGaussian(InverseGaussianSampler::new(mean, shape)?)
            }
        })
    }

    fn sample(&self, stream: &mut Stream) -> f64 {
        match self {
            FitSampler::Normal { mean, sd } => mean + sd * stream.std_normal(),
            FitSampler::Gamma(g) => g.sample(stream),
            FitSampler::InverseGaussian(ig) => ig.sample(stream),
        }
    }
}

/// `D_N = √N · max_i max(i/N - Z_(i), Z_(i) - (i-1)/N)` for ascending `Z`.
pub fn dn_statistic(z_sorted: &[f64]) -> Result<f64> {
    if z_sorted.is_empty() {
        return domain("D_N needs at least one value");
    }
    if z_sorted.iter().any(|z| !(0.0..=1.0).contains(z)) {
        return domain("D_N inputs must be probabilities in [0, 1]");
    }
    if z_sorted.windows(2).any(|w| w[1] < w[0]) {
        return domain("D_N inputs must be sorted ascending");
    }
    Ok(dn_unchecked(z_sorted))
}

fn dn_unchecked(z_sorted: &[f64]) -> f64 {
    let n = z_sorted.len() as f64;
    let sup = z_sorted.iter().enumerate().fold(0.0f64, |acc, (i, &z)| {
        let upper = (i + 1) as f64 / n - z;
        let lower = z - i as f64 / n;
        acc.max(upper).max(lower)
    });
    n.sqrt() * sup
}

/// Sorted probability-integral transforms of `x` under `fit`, written into `buf`.
fn sorted_pit(fit: &FamilyFit, x: &[f64], buf: &mut Vec<f64>) {
    buf.clear();
    buf.extend(x.iter().map(|&v| fit.cdf(v)));
    buf.sort_unstable_by(f64::total_cmp);
}

/// `Z_i = F(x_i; θ̂)` in ascending order.
pub fn probability_transforms(fit: &FamilyFit, x: &[f64]) -> Vec<f64> {
    let mut buf = Vec::with_capacity(x.len());
    sorted_pit(fit, x, &mut buf);
    buf
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum GofProcedure {
    /// Bootstrap-parameter KS test for Brownian motion.
    BootstrapKs,
    /// Parametric bootstrap of `D_N`.
    ParametricBootstrap,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GofResult {
    pub procedure: GofProcedure,
    pub family: Family,
    /// KS sup-distance for Procedure 1, `D_N` for Procedure 2.
    pub statistic: f64,
    pub p_value: Option<f64>,
    /// Bootstrap `(1-α)` nearest-rank critical value (Procedure 2).
    pub critical: Option<f64>,
    pub alpha: f64,
    pub reject: bool,
    pub bootstrap_count: usize,
    pub fit: FamilyFit,
}

/// Which sample Procedure 1 feeds to the KS test.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum KsSample {
    /// The original increments (parameters from the resample).
    #[default]
    Original,
    /// The bootstrap resample itself.
    Resample,
}

/// Mean and (divisor `N-1`) standard deviation of one with-replacement resample.
fn resample_normal_params(x: &[f64], stream: &mut Stream, keep: Option<&mut Vec<f64>>) -> (f64, f64) {
    let n = x.len();
    let mut local = Vec::new();
    let buf = keep.unwrap_or(&mut local);
    buf.clear();
    buf.extend((0..n).map(|_| x[stream.index(n)]));
    let mean = buf.iter().sum::<f64>() / n as f64;
    let var = buf.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n as f64 - 1.0);
    (mean, var.sqrt())
}

pub fn procedure1_bm_test(x: &[f64], stream: &mut Stream, alpha: f64, ks_sample: KsSample) -> Result<GofResult> {
    if x.len() < 2 {
        return domain(format!("Procedure 1 needs N >= 2, got {}", x.len()));
    }
    if !(alpha > 0.0 && alpha < 1.0) {
        return domain(format!("alpha must lie in (0, 1), got {alpha}"));
    }
    let mut resample = Vec::with_capacity(x.len());
    let mut params = resample_normal_params(x, stream, Some(&mut resample));
    if !(params.1 > 0.0) {
        params = resample_normal_params(x, stream, Some(&mut resample));
    }
    let (mean, sd) = params;
    if !(sd > 0.0) || !sd.is_finite() {
        return Err(Error::Degenerate("bootstrap resample has zero standard deviation".into()));
    }
    let fit = FamilyFit::Normal { mean, sd };
    let tested = match ks_sample {
        KsSample::Original => x,
        KsSample::Resample => &resample[..],
    };
    let z = probability_transforms(&fit, tested);
    let n = tested.len();
    let distance = dn_unchecked(&z) / (n as f64).sqrt();
    let p = ks_pvalue(distance, n)?.get();
    Ok(GofResult {
        procedure: GofProcedure::BootstrapKs,
        family: Family::Normal,
        statistic: distance,
        p_value: Some(p),
        critical: None,
        alpha,
        reject: p < alpha,
        bootstrap_count: 1,
        fit,
    })
}

/// Nearest-rank `q` quantile of ascending `sorted`.
pub fn nearest_rank(sorted: &[f64], q: f64) -> f64 {
    let n = sorted.len();
    let rank = ((q * n as f64).ceil() as usize).clamp(1, n);
    sorted[rank - 1]
}

/// Parametric-bootstrap test of `x` against `family`.
///
/// Replicate `b` draws from `derive_stream(seed, b)`, so the result does not
/// depend on how many threads run the replicates. A replicate whose refit fails
/// is redrawn from its own stream, up to 10 times.
pub fn procedure2_gof_test(
    x: &[f64],
    family: Family,
    seed: Seed,
    bootstrap_count: usize,
    alpha: f64,
) -> Result<GofResult> {
    if x.len() < 2 {
        return domain(format!("Procedure 2 needs N >= 2, got {}", x.len()));
    }
    if bootstrap_count == 0 {
        return domain("bootstrap count must be at least 1");
    }
    if !(alpha > 0.0 && alpha < 1.0) {
        return domain(format!("alpha must lie in (0, 1), got {alpha}"));
    }
    let fit = fit_moments(x, family)?;
    let statistic = dn_unchecked(&probability_transforms(&fit, x));
    let sampler = FitSampler::new(&fit)?;
    let n = x.len();

    let mut replicates = (0..bootstrap_count)
        .into_par_iter()
        .map_init(
            || (Vec::with_capacity(n), Vec::with_capacity(n)),
            |(draw, pit), b| {
                let mut stream = derive_stream(seed, b as u64);
                for _ in 0..MAX_ATTEMPTS_PER_REPLICATE {
                    draw.clear();
                    draw.extend((0..n).map(|_| sampler.sample(&mut stream)));
                    if let Ok(refit) = fit_moments(draw, family) {
                        sorted_pit(&refit, draw, pit);
                        return Ok(dn_unchecked(pit));
                    }
                }
                Err(Error::Fit(format!(
                    "bootstrap replicate {b} failed to refit {MAX_ATTEMPTS_PER_REPLICATE} times"
                )))
            },
        )
        .collect::<Result<Vec<f64>>>()?;
    replicates.sort_unstable_by(f64::total_cmp);
    let critical = nearest_rank(&replicates, 1.0 - alpha);
    let exceed = replicates.iter().filter(|&&d| d >= statistic).count();

    Ok(GofResult {
        procedure: GofProcedure::ParametricBootstrap,
        family,
        statistic,
        p_value: Some(exceed as f64 / bootstrap_count as f64),
        critical: Some(critical),
        alpha,
        reject: statistic > critical,
        bootstrap_count,
        fit,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    #[test]
    fn moment_fits() {
        match fit_moments(&[1.0, 2.0, 3.0, 4.0], Family::Normal).unwrap() {
            FamilyFit::Normal { mean, sd } => {
                assert_eq!(mean, 2.5);
                assert_relative_eq!(sd, 1.25f64.sqrt());
            }
            other => panic!("{other:?}"),
        }
        assert_eq!(
            fit_from_moments(1.0, 1.0, Family::Gamma).unwrap(),
            FamilyFit::Gamma { shape: 1.0, scale: 1.0 }
        );
        assert_eq!(
            fit_from_moments(2.0, 2.0, Family::InverseGaussian).unwrap(),
            FamilyFit::InverseGaussian { mean: 2.0, shape: 4.0 }
        );
        assert!(matches!(fit_moments(&[-1.0, 0.5], Family::Gamma), Err(Error::Fit(_))));
        assert!(matches!(fit_moments(&[-1.0, 0.5], Family::InverseGaussian), Err(Error::Fit(_))));
        assert!(matches!(fit_moments(&[2.0, 2.0], Family::Normal), Err(Error::Fit(_))));
        assert!(fit_moments(&[-1.0, 0.5], Family::Normal).is_ok());
    }

    #[test]
    fn cdf_reference_values() {
        let normal = FamilyFit::Normal { mean: 3.0, sd: 2.0 };
        assert_eq!(family_cdf(&normal, 3.0).get(), 0.5);

        let gamma = FamilyFit::Gamma { shape: 1.0, scale: 1.0 };
        assert_relative_eq!(family_cdf(&gamma, std::f64::consts::LN_2).get(), 0.5, max_relative = 1e-12);
        assert_eq!(family_cdf(&gamma, -1.0).get(), 0.0);
        assert_eq!(family_cdf(&gamma, 0.0).get(), 0.0);

        // mpmath, 40 digits
        let ig = FamilyFit::InverseGaussian { mean: 1.0, shape: 1.0 };
        assert!((family_cdf(&ig, 1.0).get() - 0.668_102_001_223_170_6).abs() < 1e-12);
        assert_eq!(family_cdf(&ig, -0.5).get(), 0.0);
        let ig = FamilyFit::InverseGaussian { mean: 2.0, shape: 4.0 };
        assert!((family_cdf(&ig, 1.5).get() - 0.458_023_340_150_460_9).abs() < 1e-12);
        let ig = FamilyFit::InverseGaussian { mean: 0.01, shape: 1e-4 };
        assert!((family_cdf(&ig, 0.02).get() - 0.952_591_801_327_239_8).abs() < 1e-12);
        // e^{2λ/m} = e^{1000} on its own overflows.
        let ig = FamilyFit::InverseGaussian { mean: 1.0, shape: 500.0 };
        assert!((family_cdf(&ig, 1.1).get() - 0.984_414_469_918_336_7).abs() < 1e-10);
    }

    #[test]
    fn dn_examples() {
        assert_eq!(dn_statistic(&[0.125, 0.375, 0.625, 0.875]).unwrap(), 0.25);
        assert_eq!(dn_statistic(&[0.0; 9]).unwrap(), 3.0);
        let n = 16;
        let z: Vec<f64> = (1..=n).map(|i| i as f64 / n as f64).collect();
        assert_relative_eq!(dn_statistic(&z).unwrap(), 4.0 / 16.0, max_relative = 1e-15);
        assert!(dn_statistic(&[0.5, 0.2]).is_err());
        assert!(dn_statistic(&[]).is_err());
        assert!(dn_statistic(&[0.1, 1.2]).is_err());
        assert!(dn_statistic(&[f64::NAN]).is_err());
    }

    /// Brute-force sup of |F_emp(t) - t| over a dense grid plus the jump points.
    fn sup_distance_oracle(z: &[f64]) -> f64 {
        let n = z.len() as f64;
        let emp = |t: f64, strict: bool| {
            z.iter().filter(|&&v| if strict { v < t } else { v <= t }).count() as f64 / n
        };
        let mut best = 0.0f64;
        let grid = (0..=20_000).map(|i| i as f64 / 20_000.0);
        for t in grid.chain(z.iter().copied()) {
            best = best.max((emp(t, false) - t).abs()).max((emp(t, true) - t).abs());
        }
        best
    }

    #[test]
    fn nearest_rank_percentile() {
        let v: Vec<f64> = (1..=1000).map(f64::from).collect();
        assert_eq!(nearest_rank(&v, 0.95), 950.0);
        assert_eq!(nearest_rank(&[3.0], 0.95), 3.0);
        assert_eq!(nearest_rank(&[1.0, 2.0, 3.0], 0.0), 1.0);
    }

    #[test]
    fn procedure1_degenerate_sample() {
        let mut s = derive_stream(Seed(1), 0);
        let r = procedure1_bm_test(&[1.5; 20], &mut s, 0.05, KsSample::Original);
        assert!(matches!(r, Err(Error::Degenerate(_))));
        assert!(procedure1_bm_test(&[1.0], &mut s, 0.05, KsSample::Original).is_err());
    }

    #[test]
    fn procedure1_reports_pvalue_decision() {
        let mut s = derive_stream(Seed(2), 0);
        let x: Vec<f64> = (0..100).map(|_| s.std_normal()).collect();
        for mode in [KsSample::Original, KsSample::Resample] {
            let r = procedure1_bm_test(&x, &mut s, 0.05, mode).unwrap();
            let p = r.p_value.unwrap();
            assert_eq!(r.reject, p < 0.05);
            assert!(r.statistic > 0.0 && r.statistic < 1.0);
        }
    }

    #[test]
    fn procedure2_is_reproducible_and_coherent() {
        let mut s = derive_stream(Seed(3), 0);
        let g = GammaSampler::new(1.0, 1.0).unwrap();
        let x: Vec<f64> = (0..100).map(|_| g.sample(&mut s)).collect();
        let a = procedure2_gof_test(&x, Family::Gamma, Seed(9), 200, 0.05).unwrap();
        let b = procedure2_gof_test(&x, Family::Gamma, Seed(9), 200, 0.05).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.reject, a.statistic > a.critical.unwrap());
        assert_eq!(a.bootstrap_count, 200);
        // Exponential data is far from normal at N = 100.
        let c = procedure2_gof_test(&x, Family::Normal, Seed(9), 200, 0.05).unwrap();
        assert!(c.reject);
    }

    #[test]
    fn procedure2_preconditions() {
        assert!(procedure2_gof_test(&[1.0], Family::Normal, Seed(0), 10, 0.05).is_err());
        assert!(procedure2_gof_test(&[1.0, 2.0], Family::Normal, Seed(0), 0, 0.05).is_err());
        assert!(matches!(
            procedure2_gof_test(&[-1.0, -2.0, -0.5], Family::Gamma, Seed(0), 10, 0.05),
            Err(Error::Fit(_))
        ));
    }

    #[test]
    fn procedure2_normal_affine_equivariance() {
        let mut s = derive_stream(Seed(4), 0);
        let x: Vec<f64> = (0..60).map(|_| s.std_normal() + 0.3 * s.uniform()).collect();
        let (b, c) = (2.5, -7.0);
        let y: Vec<f64> = x.iter().map(|v| b * v + c).collect();
        let zx = probability_transforms(&fit_moments(&x, Family::Normal).unwrap(), &x);
        let zy = probability_transforms(&fit_moments(&y, Family::Normal).unwrap(), &y);
        for (p, q) in zx.iter().zip(&zy) {
            assert!((p - q).abs() < 1e-12);
        }
        let rx = procedure2_gof_test(&x, Family::Normal, Seed(5), 300, 0.05).unwrap();
        let ry = procedure2_gof_test(&y, Family::Normal, Seed(5), 300, 0.05).unwrap();
        assert_eq!(rx.reject, ry.reject);
        assert!((rx.statistic - ry.statistic).abs() < 1e-10);
        assert!((rx.critical.unwrap() - ry.critical.unwrap()).abs() < 1e-10);
    }

    proptest! {
        #[test]
        fn dn_matches_sup_oracle(mut z in proptest::collection::vec(0.0f64..=1.0, 1..40)) {
            z.sort_by(f64::total_cmp);
            let dn = dn_statistic(&z).unwrap();
            let oracle = (z.len() as f64).sqrt() * sup_distance_oracle(&z);
            prop_assert!((dn - oracle).abs() < 1e-9, "{} vs {}", dn, oracle);
        }

        #[test]
        fn cdf_monotone(
            family in prop_oneof![Just(Family::Normal), Just(Family::Gamma), Just(Family::InverseGaussian)],
            m in 0.01f64..10.0,
            s2 in 0.001f64..10.0,
            x in -5.0f64..30.0,
            dx in 0.0f64..3.0,
        ) {
            let fit = fit_from_moments(m, s2, family).unwrap();
            let lo = family_cdf(&fit, x).get();
            let hi = family_cdf(&fit, x + dx).get();
            prop_assert!(lo <= hi + 1e-12, "{:?}: F({}) = {} > F({}) = {}", fit, x, lo, x + dx, hi);
        }
    }
}
