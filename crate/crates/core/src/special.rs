//! Numerical special functions used by the samplers and distribution tests.
//!
//! * `erfc`/`erfcx` follow W. J. Cody's rational Chebyshev approximations
//!   (max relative error about 1e-16 over the real line), so the normal CDF is
//!   accurate in relative terms deep into the lower tail.
//! * The normal quantile is a safeguarded Newton root-find on the CDF itself.
//! * The regularized lower incomplete gamma function uses the power series
//!   below `shape + 1` and a Lentz continued fraction above it.
//! * The Kolmogorov tail uses the asymptotic distribution for every `n`;
//!   it is only approximate for `n < 35`.

use serde::{Deserialize, Serialize};

use crate::error::{domain, Result};

/// A value in `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct Probability(f64);

impl Probability {
    pub fn new(value: f64) -> Result<Self> {
        if (0.0..=1.0).contains(&value) {
            Ok(Self(value))
        } else {
            domain(format!("probability {value} outside [0, 1]"))
        }
    }

    /// Clamps into `[0, 1]`; NaN maps to 0.
    pub(crate) fn clamped(value: f64) -> Self {
        if value.is_nan() {
            Self(0.0)
        } else {
            Self(value.clamp(0.0, 1.0))
        }
    }

    #[inline]
    pub fn get(self) -> f64 {
        self.0
    }
}

impl TryFrom<f64> for Probability {
    type Error = crate::error::Error;

    fn try_from(value: f64) -> Result<Self> {
        Self::new(value)
    }
}

impl From<Probability> for f64 {
    fn from(p: Probability) -> f64 {
        p.0
    }
}

const FRAC_1_SQRT_PI: f64 = 0.564_189_583_547_756_3;
const SQRT_2PI: f64 = 2.506_628_274_631_000_7;

const ERF_A: [f64; 5] = [
    3.161_123_743_870_565_6,
    1.138_641_541_510_501_6e2,
    3.774_852_376_853_020_2e2,
    3.209_377_589_138_469_5e3,
    1.857_777_061_846_031_5e-1,
];
const ERF_B: [f64; 4] = [
    2.360_129_095_234_412e1,
    2.440_246_379_344_441_7e2,
    1.282_616_526_077_372_3e3,
    2.844_236_833_439_170_6e3,
];
const ERF_C: [f64; 9] = [
    5.641_884_969_886_701e-1,
    8.883_149_794_388_376,
    6.611_919_063_714_163e1,
    2.986_351_381_974_001_3e2,
    8.819_522_212_417_691e2,
    1.712_047_612_634_070_6e3,
    2.051_078_377_826_071_5e3,
    1.230_339_354_797_997_2e3,
    2.153_115_354_744_038_5e-8,
];
const ERF_D: [f64; 8] = [
    1.574_492_611_070_983_5e1,
    1.176_939_508_913_125e2,
    5.371_811_018_620_099e2,
    1.621_389_574_566_690_2e3,
    3.290_799_235_733_459_6e3,
    4.362_619_090_143_247e3,
    3.439_367_674_143_721_6e3,
    1.230_339_354_803_749_4e3,
];
const ERF_P: [f64; 6] = [
    3.053_266_349_612_323_4e-1,
    3.603_448_999_498_044_4e-1,
    1.257_817_261_112_292_5e-1,
    1.608_378_514_874_227_7e-2,
    6.587_491_615_298_378e-4,
    1.631_538_713_730_209_8e-2,
];
const ERF_Q: [f64; 5] = [
    2.568_520_192_289_822,
    1.872_952_849_923_467_3,
    5.279_051_029_514_284e-1,
    6.051_834_131_244_132e-2,
    2.335_204_976_268_691_8e-3,
];

/// `erf(x)` for `|x| <= 0.46875`.
fn erf_small(x: f64) -> f64 {
    let ysq = x * x;
    let mut num = ERF_A[4] * ysq;
    let mut den = ysq;
    for i in 0..3 {
        num = (num + ERF_A[i]) * ysq;
        den = (den + ERF_B[i]) * ysq;
    }
    x * (num + ERF_A[3]) / (den + ERF_B[3])
}

/// `exp(y^2) * erfc(y)` for `y > 0.46875`.
fn erfcx_large(y: f64) -> f64 {
    if y <= 4.0 {
        let mut num = ERF_C[8] * y;
        let mut den = y;
        for i in 0..7 {
            num = (num + ERF_C[i]) * y;
            den = (den + ERF_D[i]) * y;
        }
        (num + ERF_C[7]) / (den + ERF_D[7])
    } else {
        let ysq = 1.0 / (y * y);
        let mut num = ERF_P[5] * ysq;
        let mut den = ysq;
        for i in 0..4 {
            num = (num + ERF_P[i]) * ysq;
            den = (den + ERF_Q[i]) * ysq;
        }
        let r = ysq * (num + ERF_P[4]) / (den + ERF_Q[4]);
        (FRAC_1_SQRT_PI - r) / y
    }
}

/// `exp(-y^2)` evaluated as a product that keeps the exponent's rounding error small.
fn exp_neg_sq(y: f64) -> f64 {
    let head = (y * 16.0).trunc() / 16.0;
    let del = (y - head) * (y + head);
    (-head * head).exp() * (-del).exp()
}

/// Complementary error function.
pub fn erfc(x: f64) -> f64 {
    let y = x.abs();
    let upper = if y <= 0.468_75 {
        1.0 - erf_small(y)
    } else {
        exp_neg_sq(y) * erfcx_large(y)
    };
    if x < 0.0 {
        2.0 - upper
    } else {
        upper
    }
}

/// Scaled complementary error function `exp(x^2) erfc(x)`, for `x >= 0`.
pub fn erfcx(x: f64) -> f64 {
    debug_assert!(x >= 0.0);
    if x <= 0.468_75 {
        (x * x).exp() * (1.0 - erf_small(x))
    } else {
        erfcx_large(x)
    }
}

/// Raw normal CDF; relative accuracy is kept in the lower tail.
#[inline]
pub(crate) fn phi(x: f64) -> f64 {
    0.5 * erfc(-x * std::f64::consts::FRAC_1_SQRT_2)
}

/// `ln Φ(x)`, finite for every finite `x` (no underflow in the lower tail).
pub(crate) fn ln_phi(x: f64) -> f64 {
    if x > -5.0 {
        phi(x).ln()
    } else {
        let z = -x * std::f64::consts::FRAC_1_SQRT_2;
        -z * z + (0.5 * erfcx(z)).ln()
    }
}

#[inline]
pub(crate) fn std_normal_pdf(x: f64) -> f64 {
    (-0.5 * x * x).exp() / SQRT_2PI
}

/// Standard normal CDF.
pub fn std_normal_cdf(x: f64) -> Result<Probability> {
    if !x.is_finite() {
        return domain(format!("normal cdf argument {x} is not finite"));
    }
    Ok(Probability::clamped(phi(x)))
}

/// Standard normal quantile, `Φ⁻¹(p)` for `0 < p < 1`.
pub fn std_normal_quantile(p: f64) -> Result<f64> {
    if !(p > 0.0 && p < 1.0) {
        return domain(format!("normal quantile needs 0 < p < 1, got {p}"));
    }
    if p == 0.5 {
        return Ok(0.0);
    }
    // Work in the lower half, where Φ is relatively accurate; 1 - p is exact for p >= 0.5.
    if p > 0.5 {
        Ok(-lower_quantile(1.0 - p))
    } else {
        Ok(lower_quantile(p))
    }
}

/// Solves `Φ(x) = q` for `0 < q < 0.5` on the bracket `[-40, 0]`.
fn lower_quantile(q: f64) -> f64 {
    let mut lo = -40.0_f64;
    let mut hi = 0.0_f64;
    let mut x = initial_quantile_guess(q).clamp(lo, hi);
    for _ in 0..200 {
        let f = phi(x) - q;
        if f == 0.0 {
            return x;
        }
        if f < 0.0 {
            lo = x;
        } else {
            hi = x;
        }
        let d = std_normal_pdf(x);
        let mut next = if d > 0.0 { x - f / d } else { f64::NAN };
        if !(next > lo && next < hi) {
            next = 0.5 * (lo + hi);
        }
        if (next - x).abs() <= 1e-15 * x.abs().max(1.0) || hi - lo <= f64::EPSILON * x.abs() {
            return next;
        }
        x = next;
    }
    x
}

/// Abramowitz & Stegun 26.2.23 (absolute error < 4.5e-4), lower tail.
fn initial_quantile_guess(q: f64) -> f64 {
    let t = (-2.0 * q.ln()).sqrt();
    let num = 2.515_517 + t * (0.802_853 + t * 0.010_328);
    let den = 1.0 + t * (1.432_788 + t * (0.189_269 + t * 0.001_308));
    -(t - num / den)
}

const LANCZOS_G: f64 = 7.0;
const LANCZOS: [f64; 9] = [
    0.999_999_999_999_809_9,
    676.520_368_121_885_1,
    -1_259.139_216_722_402_8,
    771.323_428_777_653_1,
    -176.615_029_162_140_6,
    12.507_343_278_686_905,
    -0.138_571_095_265_720_12,
    9.984_369_578_019_572e-6,
    1.505_632_735_149_311_6e-7,
];

/// `ln Γ(x)` for `x > 0` (Lanczos, g = 7).
pub fn ln_gamma(x: f64) -> f64 {
    if x < 0.5 {
        // Reflection keeps the small-argument regime accurate.
        let pi = std::f64::consts::PI;
        return (pi / (pi * x).sin()).ln() - ln_gamma(1.0 - x);
    }
    let x = x - 1.0;
    let mut acc = LANCZOS[0];
    for (i, c) in LANCZOS.iter().enumerate().skip(1) {
        acc += c / (x + i as f64);
    }
    let t = x + LANCZOS_G + 0.5;
    0.5 * (2.0 * std::f64::consts::PI).ln() + (x + 0.5) * t.ln() - t + acc.ln()
}

const GAMMA_EPS: f64 = 1e-16;
const GAMMA_MAX_ITER: usize = 100_000;

/// Regularized lower incomplete gamma function `P(shape, x)`.
pub fn regularized_lower_gamma(shape: f64, x: f64) -> Result<Probability> {
    if !(shape > 0.0) || !shape.is_finite() {
        return domain(format!("incomplete gamma shape must be positive, got {shape}"));
    }
    if !(x >= 0.0) {
        return domain(format!("incomplete gamma argument must be nonnegative, got {x}"));
    }
    Ok(Probability::clamped(lower_gamma_p(shape, x)))
}

/// Unchecked `P(shape, x)`; callers guarantee `shape > 0`, `x >= 0`.
pub(crate) fn lower_gamma_p(shape: f64, x: f64) -> f64 {
    if x == 0.0 {
        return 0.0;
    }
    if x.is_infinite() {
        return 1.0;
    }
    let log_prefix = shape * x.ln() - x - ln_gamma(shape);
    if x < shape + 1.0 {
        // Σ x^n / (shape (shape+1) ... (shape+n))
        let mut ap = shape;
        let mut term = 1.0 / shape;
        let mut sum = term;
        for _ in 0..GAMMA_MAX_ITER {
            ap += 1.0;
            term *= x / ap;
            sum += term;
            if term.abs() < sum.abs() * GAMMA_EPS {
                break;
            }
        }
        (sum.ln() + log_prefix).exp().min(1.0)
    } else {
        // Modified Lentz evaluation of the continued fraction for Q.
        let tiny = 1e-300;
        let mut b = x + 1.0 - shape;
        let mut c = 1.0 / tiny;
        let mut d = 1.0 / b;
        let mut h = d;
        for i in 1..GAMMA_MAX_ITER {
            let an = -(i as f64) * (i as f64 - shape);
            b += 2.0;
            d = an * d + b;
            if d.abs() < tiny {
                d = tiny;
            }
            c = b + an / c;
            if c.abs() < tiny {
                c = tiny;
            }
            d = 1.0 / d;
            let del = d * c;
            h *= del;
            if (del - 1.0).abs() < GAMMA_EPS {
                break;
            }
        }
        let q = (log_prefix + h.ln()).exp();
        (1.0 - q).max(0.0)
    }
}

const KS_TERM_CUTOFF: f64 = 1e-12;

/// Asymptotic Kolmogorov tail probability `P(K > √n·d)`.
///
/// Uses the alternating series `2 Σ (-1)^(j-1) exp(-2 j² λ²)` for `λ >= 1.18`
/// and the equivalent theta-function form
/// `1 - √(2π)/λ Σ exp(-(2j-1)² π² / (8 λ²))` below it, where the alternating
/// series converges too slowly. Both stop at the first term below 1e-12.
pub fn ks_pvalue(d: f64, n: usize) -> Result<Probability> {
    if !(d >= 0.0) || !d.is_finite() {
        return domain(format!("KS distance must be a finite nonnegative value, got {d}"));
    }
    if n == 0 {
        return domain("KS p-value needs n >= 1");
    }
    let lambda = (n as f64).sqrt() * d;
    Ok(Probability::clamped(kolmogorov_tail(lambda)))
}

pub(crate) fn kolmogorov_tail(lambda: f64) -> f64 {
    if lambda <= 0.0 {
        return 1.0;
    }
    if lambda < 1.18 {
        let pi2 = std::f64::consts::PI * std::f64::consts::PI;
        let k = -pi2 / (8.0 * lambda * lambda);
        let mut sum = 0.0;
        let mut j = 1u32;
        loop {
            let odd = f64::from(2 * j - 1);
            let term = (k * odd * odd).exp();
            sum += term;
            if term < KS_TERM_CUTOFF || j > 1000 {
                break;
            }
            j += 1;
        }
        (1.0 - SQRT_2PI / lambda * sum).clamp(0.0, 1.0)
    } else {
        let k = -2.0 * lambda * lambda;
        let mut sum = 0.0;
        let mut sign = 1.0;
        let mut j = 1u32;
        loop {
            let jf = f64::from(j);
            let term = (k * jf * jf).exp();
            sum += sign * term;
            if term < KS_TERM_CUTOFF || j > 1000 {
                break;
            }
            sign = -sign;
            j += 1;
        }
        (2.0 * sum).clamp(0.0, 1.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    // Simpson quadrature of the normal density, independent of erfc.
    fn phi_by_quadrature(x: f64) -> f64 {
        let (a, b) = if x < 0.0 { (x - 12.0, x) } else { (0.0, x) };
        let n = 20_000;
        let h = (b - a) / n as f64;
        let mut s = std_normal_pdf(a) + std_normal_pdf(b);
        for i in 1..n {
            let w = if i % 2 == 1 { 4.0 } else { 2.0 };
            s += w * std_normal_pdf(a + i as f64 * h);
        }
        let integral = s * h / 3.0;
        if x < 0.0 {
            integral
        } else {
            0.5 + integral
        }
    }

    #[test]
    fn normal_cdf_reference_values() {
        assert_eq!(std_normal_cdf(0.0).unwrap().get(), 0.5);
        // mpmath, 40 digits
        assert!((std_normal_cdf(1.96).unwrap().get() - 0.975_002_104_851_779_6).abs() < 1e-12);
        assert_relative_eq!(
            std_normal_cdf(-8.0).unwrap().get(),
            6.220_960_574_271_784e-16,
            max_relative = 1e-12
        );
        assert_relative_eq!(phi(-37.0), 5.725_571_222_524_577e-300, max_relative = 1e-10);
        assert!((phi(3.5) - 0.999_767_370_920_964_5).abs() < 1e-14);
    }

    #[test]
    fn normal_cdf_matches_quadrature() {
        for i in -60..=60 {
            let x = i as f64 * 0.1;
            assert!((phi(x) - phi_by_quadrature(x)).abs() < 1e-12, "x = {x}");
        }
    }

    #[test]
    fn normal_cdf_rejects_non_finite() {
        assert!(std_normal_cdf(f64::NAN).is_err());
        assert!(std_normal_cdf(f64::INFINITY).is_err());
    }

    #[test]
    fn normal_quantile_reference_values() {
        assert_eq!(std_normal_quantile(0.5).unwrap(), 0.0);
        assert!((std_normal_quantile(0.975).unwrap() - 1.959_963_984_540_054).abs() < 1e-9);
        assert!((std_normal_quantile(0.025).unwrap() + 1.959_963_984_540_054).abs() < 1e-9);
        assert!((std_normal_quantile(1e-10).unwrap() + 6.361_340_902_404_056).abs() < 1e-9);
        for p in [0.0, 1.0, -0.1, 1.5, f64::NAN] {
            assert!(std_normal_quantile(p).is_err());
        }
    }

    #[test]
    fn normal_quantile_inverts_cdf_in_the_extreme_tail() {
        for p in [1e-300, 1e-100, 1e-20, 1e-5, 0.3, 0.7, 1.0 - 1e-12] {
            let x = std_normal_quantile(p).unwrap();
            let back = phi(x);
            assert!((back - p).abs() <= 1e-10, "p = {p}, x = {x}");
            if p < 0.5 {
                assert_relative_eq!(back, p, max_relative = 1e-9);
            }
        }
    }

    #[test]
    fn erfc_handles_both_signs() {
        assert_relative_eq!(erfc(0.0), 1.0);
        assert_relative_eq!(erfc(-1.0) + erfc(1.0), 2.0, max_relative = 1e-15);
        assert_relative_eq!(erfcx(30.0) * 30.0 * std::f64::consts::PI.sqrt(), 1.0, max_relative = 1e-3);
    }

    #[test]
    fn ln_phi_is_finite_far_in_the_tail() {
        assert_relative_eq!(ln_phi(-2.0), 0.022_750_131_948_179_21_f64.ln(), max_relative = 1e-13);
        assert_relative_eq!(ln_phi(-37.0), 5.725_571_222_524_577e-300_f64.ln(), max_relative = 1e-12);
        let far = ln_phi(-60.0);
        assert!(far.is_finite() && far < -1800.0);
    }

    #[test]
    fn ln_gamma_known_values() {
        assert_relative_eq!(ln_gamma(1.0), 0.0, epsilon = 1e-14);
        assert_relative_eq!(ln_gamma(0.5), std::f64::consts::PI.sqrt().ln(), max_relative = 1e-13);
        assert_relative_eq!(ln_gamma(10.0), 362_880.0_f64.ln(), max_relative = 1e-14);
        assert_relative_eq!(ln_gamma(1e-3), 6.907_178_885_383_854, max_relative = 1e-12);
    }

    #[test]
    fn lower_gamma_reference_values() {
        let p = |a, x| regularized_lower_gamma(a, x).unwrap().get();
        assert_relative_eq!(p(1.0, std::f64::consts::LN_2), 0.5, max_relative = 1e-12);
        assert_eq!(p(3.7, 0.0), 0.0);
        // closed form 1 - e^{-2}(1 + 2)
        assert_relative_eq!(p(2.0, 2.0), 1.0 - (-2.0_f64).exp() * 3.0, max_relative = 1e-12);
        // mpmath, 40 digits
        assert_relative_eq!(p(2.0, 2.0), 0.593_994_150_290_161_9, max_relative = 1e-10);
        assert_relative_eq!(p(0.5, 0.3), 0.561_421_973_919_000_1, max_relative = 1e-10);
        assert_relative_eq!(p(10.0, 12.5), 0.798_568_895_054_464_2, max_relative = 1e-10);
        assert_relative_eq!(p(0.001, 1e-5), 0.989_123_044_695_782_7, max_relative = 1e-10);
        assert_relative_eq!(p(100.0, 90.0), 0.158_220_989_186_430_17, max_relative = 1e-10);
        assert_relative_eq!(p(3.0, 20.0), 0.999_999_544_485_049_4, max_relative = 1e-10);
        assert_eq!(p(2.0, f64::INFINITY), 1.0);
    }

    #[test]
    fn lower_gamma_rejects_bad_arguments() {
        assert!(regularized_lower_gamma(0.0, 1.0).is_err());
        assert!(regularized_lower_gamma(-1.0, 1.0).is_err());
        assert!(regularized_lower_gamma(1.0, -0.5).is_err());
    }

    #[test]
    fn ks_pvalue_reference_values() {
        assert_eq!(ks_pvalue(0.0, 10).unwrap().get(), 1.0);
        // series summed with mpmath at 40 digits
        let at = |lambda: f64| ks_pvalue(lambda / 10.0, 100).unwrap().get();
        assert!((at(1.36) - 0.049_485_876_755_377_91).abs() < 1e-10);
        assert!((at(0.5) - 0.963_945_243_664_875_1).abs() < 1e-10);
        assert!((at(1.0) - 0.269_999_671_677_354_5).abs() < 1e-10);
        assert!((at(0.3) - 0.999_990_694_198_665_4).abs() < 1e-10);
        assert!((at(2.0) - 6.709_252_557_796_953e-4).abs() < 1e-10);
        assert!(ks_pvalue(5.0, 100).unwrap().get() < 1e-12);
        assert!(ks_pvalue(-0.1, 5).is_err());
        assert!(ks_pvalue(0.1, 0).is_err());
    }

    #[test]
    fn ks_series_forms_agree_at_the_switch() {
        let lambda = 1.18;
        let alt = {
            let mut s = 0.0;
            for j in 1..200 {
                let jf = j as f64;
                s += if j % 2 == 1 { 1.0 } else { -1.0 } * (-2.0 * jf * jf * lambda * lambda).exp();
            }
            2.0 * s
        };
        assert!((kolmogorov_tail(lambda - 1e-12) - alt).abs() < 1e-12);
        assert!((kolmogorov_tail(lambda) - alt).abs() < 1e-12);
    }

    proptest! {
        #[test]
        fn normal_cdf_symmetry(x in -40.0f64..40.0) {
            let s = std_normal_cdf(x).unwrap().get() + std_normal_cdf(-x).unwrap().get();
            prop_assert!((s - 1.0).abs() <= 1e-12);
        }

        #[test]
        fn normal_cdf_monotone(x in -38.0f64..38.0, dx in 0.0f64..1.0) {
            prop_assert!(phi(x) <= phi(x + dx));
        }

        #[test]
        fn quantile_inverts_cdf(x in -6.0f64..6.0) {
            let p = std_normal_cdf(x).unwrap().get();
            let back = std_normal_quantile(p).unwrap();
            prop_assert!((back - x).abs() <= 1e-8, "x = {}, back = {}", x, back);
        }

        #[test]
        fn quantile_meets_cdf_tolerance(p in 1e-12f64..(1.0 - 1e-12)) {
            let x = std_normal_quantile(p).unwrap();
            prop_assert!((phi(x) - p).abs() <= 1e-10);
        }

        #[test]
        fn lower_gamma_nondecreasing(shape in 1e-3f64..200.0, x in 0.0f64..400.0, dx in 0.0f64..5.0) {
            let a = regularized_lower_gamma(shape, x).unwrap().get();
            let b = regularized_lower_gamma(shape, x + dx).unwrap().get();
            prop_assert!(a <= b + 1e-14, "shape {} x {} dx {}: {} > {}", shape, x, dx, a, b);
        }

        #[test]
        fn lower_gamma_shape_one_is_exponential(x in 0.0f64..30.0) {
            let p = regularized_lower_gamma(1.0, x).unwrap().get();
            prop_assert!((p - (-(-x).exp_m1())).abs() <= 1e-13);
        }

        #[test]
        fn ks_pvalue_nonincreasing(n in 1usize..2000, d in 0.0f64..1.5, dd in 0.0f64..0.2) {
            let a = ks_pvalue(d, n).unwrap().get();
            let b = ks_pvalue(d + dd, n).unwrap().get();
            prop_assert!(b <= a + 1e-14);
        }
    }
}
