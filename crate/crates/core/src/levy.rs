//! Driving-process increments for the supported Lévy families.
//!
//! Every family is parameterized by the unit-time mean `mu = E[L(1)]` and
//! variance `eta2 = Var[L(1)]`; an increment over `dt` then has mean `mu·dt`
//! and variance `eta2·dt`.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::rng::{GammaSampler, InverseGaussianSampler, Stream};

/// Share of mean and variance carried by the Gamma part of the mixed driver.
pub const DEFAULT_MIX_WEIGHT: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LevyParams {
    pub mu: f64,
    pub eta2: f64,
}

impl LevyParams {
    pub fn new(mu: f64, eta2: f64) -> Result<Self> {
        if !mu.is_finite() {
            return domain(format!("mu must be finite, got {mu}"));
        }
        if !(eta2 > 0.0) || !eta2.is_finite() {
            return domain(format!("eta2 must be positive, got {eta2}"));
        }
        Ok(Self { mu, eta2 })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DrivingKind {
    BrownianMotion,
    Gamma,
    InverseGaussian,
    MixedIGGamma,
}

impl DrivingKind {
    pub const ALL: [DrivingKind; 4] = [
        DrivingKind::BrownianMotion,
        DrivingKind::Gamma,
        DrivingKind::InverseGaussian,
        DrivingKind::MixedIGGamma,
    ];

    /// Gamma, IG and their mixture are nondecreasing (positive increments).
    pub fn is_subordinator(self) -> bool {
        !matches!(self, DrivingKind::BrownianMotion)
    }

    pub fn as_flag(self) -> &'static str {
        match self {
            DrivingKind::BrownianMotion => "bm",
            DrivingKind::Gamma => "gamma",
            DrivingKind::InverseGaussian => "ig",
            DrivingKind::MixedIGGamma => "mixed",
        }
    }
}

impl fmt::Display for DrivingKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_flag())
    }
}

impl FromStr for DrivingKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "bm" | "brownian" | "normal" => Ok(DrivingKind::BrownianMotion),
            "gamma" => Ok(DrivingKind::Gamma),
            "ig" | "inverse_gaussian" | "inversegaussian" => Ok(DrivingKind::InverseGaussian),
            "mixed" | "mixed_ig_gamma" => Ok(DrivingKind::MixedIGGamma),
            other => Err(Error::Parse(format!("unknown driver '{other}' (bm|gamma|ig|mixed)"))),
        }
    }
}

/// Law of one increment over a fixed time step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum IncrementLaw {
    Normal { mean: f64, variance: f64 },
    Gamma { shape: f64, scale: f64 },
    InverseGaussian { mean: f64, shape: f64 },
    /// Independent sum of a Gamma and an Inverse Gaussian increment.
    Mixed {
        gamma_shape: f64,
        gamma_scale: f64,
        ig_mean: f64,
        ig_shape: f64,
    },
}

impl IncrementLaw {
    pub fn mean(&self) -> f64 {
        match *self {
            IncrementLaw::Normal { mean, .. } => mean,
            IncrementLaw::Gamma { shape, scale } => shape * scale,
            IncrementLaw::InverseGaussian { mean, .. } => mean,
            IncrementLaw::Mixed { gamma_shape, gamma_scale, ig_mean, .. } => gamma_shape * gamma_scale + ig_mean,
        }
    }

    pub fn variance(&self) -> f64 {
        match *self {
            IncrementLaw::Normal { variance, .. } => variance,
            IncrementLaw::Gamma { shape, scale } => shape * scale * scale,
            IncrementLaw::InverseGaussian { mean, shape } => mean * mean * mean / shape,
            IncrementLaw::Mixed { gamma_shape, gamma_scale, ig_mean, ig_shape } => {
                gamma_shape * gamma_scale * gamma_scale + ig_mean * ig_mean * ig_mean / ig_shape
            }
        }
    }
}

fn gamma_law(p: LevyParams, dt: f64) -> Result<(f64, f64)> {
    if !(p.mu > 0.0) {
        return domain(format!("Gamma driver needs mu > 0, got {}", p.mu));
    }
    Ok((p.mu * p.mu / p.eta2 * dt, p.eta2 / p.mu))
}

fn ig_law(p: LevyParams, dt: f64) -> Result<(f64, f64)> {
    if !(p.mu > 0.0) {
        return domain(format!("Inverse Gaussian driver needs mu > 0, got {}", p.mu));
    }
    let mean = p.mu * dt;
    Ok((mean, p.mu * p.mu * p.mu * dt * dt / p.eta2))
}

/// Parameters of the increment over `dt`, with the default mixing weight.
pub fn increment_params(kind: DrivingKind, params: LevyParams, dt: f64) -> Result<IncrementLaw> {
    increment_params_weighted(kind, params, dt, DEFAULT_MIX_WEIGHT)
}

/// As [`increment_params`]; `gamma_weight` in (0, 1) is the fraction of `mu` and
/// `eta2` assigned to the Gamma part of [`DrivingKind::MixedIGGamma`].
pub fn increment_params_weighted(
    kind: DrivingKind,
    params: LevyParams,
    dt: f64,
    gamma_weight: f64,
) -> Result<IncrementLaw> {
    if !(dt > 0.0) || !dt.is_finite() {
        return domain(format!("time step must be positive, got {dt}"));
    }
    let params = LevyParams::new(params.mu, params.eta2)?;
    match kind {
        DrivingKind::BrownianMotion => Ok(IncrementLaw::Normal {
            mean: params.mu * dt,
            variance: params.eta2 * dt,
        }),
        DrivingKind::Gamma => {
            let (shape, scale) = gamma_law(params, dt)?;
            Ok(IncrementLaw::Gamma { shape, scale })
        }
        DrivingKind::InverseGaussian => {
            let (mean, shape) = ig_law(params, dt)?;
            Ok(IncrementLaw::InverseGaussian { mean, shape })
        }
        DrivingKind::MixedIGGamma => {
            if !(gamma_weight > 0.0 && gamma_weight < 1.0) {
                return domain(format!("mixing weight must lie in (0, 1), got {gamma_weight}"));
            }
            let w = gamma_weight;
            let g = LevyParams { mu: w * params.mu, eta2: w * params.eta2 };
            let ig = LevyParams { mu: (1.0 - w) * params.mu, eta2: (1.0 - w) * params.eta2 };
            let (gamma_shape, gamma_scale) = gamma_law(g, dt)?;
            let (ig_mean, ig_shape) = ig_law(ig, dt)?;
            Ok(IncrementLaw::Mixed { gamma_shape, gamma_scale, ig_mean, ig_shape })
        }
    }
}

/// An [`IncrementLaw`] with its samplers prepared for repeated draws.
#[derive(Debug, Clone, Copy)]
pub enum IncrementSampler {
    Normal { mean: f64, sd: f64 },
    Gamma(GammaSampler),
    InverseGaussian(InverseGaussianSampler),
    Mixed(GammaSampler, InverseGaussianSampler),
}

impl IncrementSampler {
    pub fn new(law: IncrementLaw) -> Result<Self> {
        Ok(match law {
            IncrementLaw::Normal { mean, variance } => {
                if !(variance > 0.0) {
                    return domain("normal increment variance must be positive");
                }
                IncrementSampler::Normal { mean, sd: variance.sqrt() }
            }
            IncrementLaw::Gamma { shape, scale } => IncrementSampler::Gamma(GammaSampler::new(shape, scale)?),
            IncrementLaw::InverseGaussian { mean, shape } => {
                IncrementSampler::InverseGaussian(InverseGaussianSampler::new(mean, shape)?)
            }
            IncrementLaw::Mixed { gamma_shape, gamma_scale, ig_mean, ig_shape } => IncrementSampler::Mixed(
                GammaSampler::new(gamma_shape, gamma_scale)?,
                InverseGaussianSampler::new(ig_mean, ig_shape)?,
            ),
        })
    }

    #[inline]
    pub fn sample(&self, stream: &mut Stream) -> f64 {
        match self {
            IncrementSampler::Normal { mean, sd } => mean + sd * stream.std_normal(),
            IncrementSampler::Gamma(g) => g.sample(stream),
            IncrementSampler::InverseGaussian(ig) => ig.sample(stream),
            IncrementSampler::Mixed(g, ig) => g.sample(stream) + ig.sample(stream),
        }
    }
}

/// `count` independent increments over `dt`.
pub fn sample_increment_sequence(
    kind: DrivingKind,
    params: LevyParams,
    dt: f64,
    count: usize,
    stream: &mut Stream,
) -> Result<Vec<f64>> {
    if count == 0 {
        return domain("increment count must be at least 1");
    }
    let sampler = IncrementSampler::new(increment_params(kind, params, dt)?)?;
    Ok((0..count).map(|_| sampler.sample(stream)).collect())
}
