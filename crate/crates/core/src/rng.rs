//! Deterministic, splittable random streams and the samplers built on them.
//!
//! A [`Stream`] is a ChaCha8 keystream keyed by the master [`Seed`] and
//! positioned on its own 64-bit stream id, so `derive_stream(seed, i)` for
//! distinct `i` never overlap and do not depend on the order in which they are
//! created. Parallel code derives one stream per work item by index and never
//! shares a generator between threads.
//!
//! Number pattern consumed per draw:
//! * `sample_std_normal`: exactly two uniforms (Box–Muller, cosine branch).
//! * `sample_gamma`: Marsaglia–Tsang rounds of one normal and one uniform,
//!   repeated until acceptance; shape < 1 adds one trailing uniform.
//! * `sample_inverse_gaussian`: one normal and one uniform.

use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};
use serde::{Deserialize, Serialize};

use crate::error::{domain, Result};

/// Master seed of an experiment.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Seed(pub u64);

impl Seed {
    pub fn stream(self, index: u64) -> Stream {
        derive_stream(self, index)
    }
}

impl std::str::FromStr for Seed {
    type Err = std::num::ParseIntError;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        s.trim().parse().map(Seed)
    }
}

/// Single-owner random source.
#[derive(Debug, Clone)]
pub struct Stream {
    rng: ChaCha8Rng,
}

pub fn derive_stream(seed: Seed, index: u64) -> Stream {
    let mut rng = ChaCha8Rng::seed_from_u64(seed.0);
    rng.set_stream(index);
    Stream { rng }
}

const UNIT_53: f64 = 1.0 / (1u64 << 53) as f64;

impl Stream {
    #[inline]
    pub fn next_u64(&mut self) -> u64 {
        self.rng.next_u64()
    }

    /// Seed for a nested family of streams (e.g. bootstrap replicates).
    pub fn spawn_seed(&mut self) -> Seed {
        Seed(self.next_u64())
    }

    /// Uniform on the open interval (0, 1).
    #[inline]
    pub fn uniform(&mut self) -> f64 {
        ((self.next_u64() >> 11) as f64 + 0.5) * UNIT_53
    }

    /// Uniform index in `0..n`; `n` must be nonzero.
    #[inline]
    pub fn index(&mut self, n: usize) -> usize {
        debug_assert!(n > 0);
        ((self.uniform() * n as f64) as usize).min(n - 1)
    }

    #[inline]
    pub fn std_normal(&mut self) -> f64 {
        let u1 = self.uniform();
        let u2 = self.uniform();
        (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
    }
}

pub fn sample_uniform(stream: &mut Stream) -> f64 {
    stream.uniform()
}

pub fn sample_std_normal(stream: &mut Stream) -> f64 {
    stream.std_normal()
}

pub fn sample_gamma(shape: f64, scale: f64, stream: &mut Stream) -> Result<f64> {
    Ok(GammaSampler::new(shape, scale)?.sample(stream))
}

pub fn sample_inverse_gaussian(mean: f64, shape: f64, stream: &mut Stream) -> Result<f64> {
    Ok(InverseGaussianSampler::new(mean, shape)?.sample(stream))
}

fn check_positive(name: &str, value: f64) -> Result<()> {
    if value > 0.0 && value.is_finite() {
        Ok(())
    } else {
        domain(format!("{name} must be positive and finite, got {value}"))
    }
}

/// Gamma(shape, scale) with the Marsaglia–Tsang squeeze; shapes below one are
/// boosted through `G(shape + 1) · U^(1/shape)`.
#[derive(Debug, Clone, Copy)]
pub struct GammaSampler {
    scale: f64,
    d: f64,
    c: f64,
    /// `Some(1/shape)` when the boost is needed.
    inv_shape: Option<f64>,
}

impl GammaSampler {
    pub fn new(shape: f64, scale: f64) -> Result<Self> {
        check_positive("gamma shape", shape)?;
        check_positive("gamma scale", scale)?;
        let (base, inv_shape) = if shape < 1.0 {
            (shape + 1.0, Some(1.0 / shape))
        } else {
            (shape, None)
        };
        let d = base - 1.0 / 3.0;
        Ok(Self {
            scale,
            d,
            c: 1.0 / (9.0 * d).sqrt(),
            inv_shape,
        })
    }

    /// Always strictly positive: draws that underflow (possible for tiny shapes,
    /// where half the mass can sit below 1e-300) are lifted to `f64::MIN_POSITIVE`.
    pub fn sample(&self, stream: &mut Stream) -> f64 {
        let g = loop {
            let x = stream.std_normal();
            let v = 1.0 + self.c * x;
            if v <= 0.0 {
                continue;
            }
            let v = v * v * v;
            let u = stream.uniform();
            let x2 = x * x;
            if u < 1.0 - 0.0331 * x2 * x2 || u.ln() < 0.5 * x2 + self.d * (1.0 - v + v.ln()) {
                break self.d * v;
            }
        };
        let value = match self.inv_shape {
            None => g * self.scale,
            Some(inv) => {
                let log_boost = stream.uniform().ln() * inv;
                (g.ln() + log_boost + self.scale.ln()).exp()
            }
        };
        value.max(f64::MIN_POSITIVE)
    }
}

/// Inverse Gaussian(mean, shape) by the Michael–Schucany–Haas transformation.
#[derive(Debug, Clone, Copy)]
pub struct InverseGaussianSampler {
    mean: f64,
    shape: f64,
}

impl InverseGaussianSampler {
    pub fn new(mean: f64, shape: f64) -> Result<Self> {
        check_positive("inverse Gaussian mean", mean)?;
        check_positive("inverse Gaussian shape", shape)?;
        Ok(Self { mean, shape })
    }

    pub fn sample(&self, stream: &mut Stream) -> f64 {
        let m = self.mean;
        let nu = stream.std_normal();
        let y = nu * nu;
        let my = m * y;
        // The two roots multiply to m²; take the larger one without cancellation.
        let big = m + m * (my + (4.0 * self.shape * my + my * my).sqrt()) / (2.0 * self.shape);
        let small = m * m / big;
        let u = stream.uniform();
        let x = if u <= m / (m + small) { small } else { big };
        x.max(f64::MIN_POSITIVE)
    }
}
