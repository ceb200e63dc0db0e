//! Simulation of stationary CAR(1) paths `dY = -aY dt + σ dL` on the grid `i/M`.

use serde::{Deserialize, Serialize};

use crate::error::{domain, Result};
use crate::levy::{increment_params_weighted, DrivingKind, IncrementSampler, LevyParams, DEFAULT_MIX_WEIGHT};
use crate::rng::Stream;

pub const DEFAULT_SUBSTEPS: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Car1Params {
    pub a: f64,
    pub sigma: f64,
}

impl Car1Params {
    pub fn new(a: f64, sigma: f64) -> Result<Self> {
        if !(a > 0.0) || !a.is_finite() {
            return domain(format!("mean-reversion rate a must be positive, got {a}"));
        }
        if !(sigma > 0.0) || !sigma.is_finite() {
            return domain(format!("sigma must be positive, got {sigma}"));
        }
        Ok(Self { a, sigma })
    }
}

/// `N` unit periods of `M` observations each; `N·M + 1` points including time 0.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SamplingGrid {
    n_periods: usize,
    per_period: usize,
}

impl SamplingGrid {
    pub fn new(n_periods: usize, per_period: usize) -> Result<Self> {
        if n_periods == 0 || per_period == 0 {
            return domain(format!("grid needs N >= 1 and M >= 1, got N={n_periods}, M={per_period}"));
        }
        if n_periods.checked_mul(per_period).and_then(|x| x.checked_add(1)).is_none() {
            return domain("grid size overflows");
        }
        Ok(Self { n_periods, per_period })
    }

    #[inline]
    pub fn n_periods(&self) -> usize {
        self.n_periods
    }

    #[inline]
    pub fn per_period(&self) -> usize {
        self.per_period
    }

    /// Number of grid steps, `N·M`.
    #[inline]
    pub fn steps(&self) -> usize {
        self.n_periods * self.per_period
    }

    /// Number of points, `N·M + 1`.
    #[inline]
    pub fn len(&self) -> usize {
        self.steps() + 1
    }

    pub fn time(&self, i: usize) -> f64 {
        i as f64 / self.per_period as f64
    }
}

/// Observations `Y_{i/M}`, `i = 0..=N·M`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Path {
    grid: SamplingGrid,
    values: Vec<f64>,
}

impl Path {
    pub fn new(grid: SamplingGrid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return domain(format!(
                "path has {} values but the grid N={}, M={} needs {}",
                values.len(),
                grid.n_periods,
                grid.per_period,
                grid.len()
            ));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return domain(format!("path value at index {i} is not finite"));
        }
        Ok(Self { grid, values })
    }

    #[inline]
    pub fn grid(&self) -> SamplingGrid {
        self.grid
    }

    #[inline]
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn times(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.values.len()).map(|i| self.grid.time(i))
    }
}

/// Driving process: family, unit-time moments and (for the mixture) the Gamma share.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Driver {
    pub kind: DrivingKind,
    pub levy: LevyParams,
    pub mix_weight: f64,
}

impl Driver {
    pub fn new(kind: DrivingKind, levy: LevyParams) -> Self {
        Self { kind, levy, mix_weight: DEFAULT_MIX_WEIGHT }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Scheme {
    /// `K` sub-steps per grid step: exact decay of the state, whole driving
    /// increment added at the end of each sub-step.
    FineStep { substeps: usize },
    /// Exact AR(1) transition of a Brownian-driven CAR(1) at the grid spacing.
    ExactBrownian,
}

impl Default for Scheme {
    fn default() -> Self {
        Scheme::FineStep { substeps: DEFAULT_SUBSTEPS }
    }
}

/// Burn-in length in time units before the first recorded point.
pub fn burn_in_time(a: f64) -> f64 {
    (10.0 / a).max(10.0)
}

/// Stationary path; the initial state is obtained by burn-in from the
/// stationary mean (or drawn exactly under [`Scheme::ExactBrownian`]).
pub fn simulate_path(
    car1: &Car1Params,
    driver: &Driver,
    grid: &SamplingGrid,
    scheme: Scheme,
    stream: &mut Stream,
) -> Result<Path> {
    simulate(car1, driver, grid, scheme, None, stream)
}

/// Path started at a fixed `y0` with no burn-in.
pub fn simulate_path_from(
    car1: &Car1Params,
    driver: &Driver,
    grid: &SamplingGrid,
    scheme: Scheme,
    y0: f64,
    stream: &mut Stream,
) -> Result<Path> {
    if !y0.is_finite() {
        return domain("initial value must be finite");
    }
    simulate(car1, driver, grid, scheme, Some(y0), stream)
}

fn simulate(
    car1: &Car1Params,
    driver: &Driver,
    grid: &SamplingGrid,
    scheme: Scheme,
    y0: Option<f64>,
    stream: &mut Stream,
) -> Result<Path> {
    let car1 = Car1Params::new(car1.a, car1.sigma)?;
    let grid = SamplingGrid::new(grid.n_periods, grid.per_period)?;
    let moments = stationary_moments(&car1, &driver.levy);
    let mut values = Vec::with_capacity(grid.len());

    match scheme {
        Scheme::FineStep { substeps } => {
            if substeps == 0 {
                return domain("substeps must be at least 1");
            }
            let delta = 1.0 / (grid.per_period * substeps) as f64;
            let law = increment_params_weighted(driver.kind, driver.levy, delta, driver.mix_weight)?;
            let sampler = IncrementSampler::new(law)?;
            let decay = (-car1.a * delta).exp();
            let sigma = car1.sigma;
            let mut y = match y0 {
                Some(v) => v,
                None => {
                    let burn_steps = (burn_in_time(car1.a) / delta).ceil() as usize;
                    let mut y = moments.mean;
                    for _ in 0..burn_steps {
                        y = decay * y + sigma * sampler.sample(stream);
                    }
                    y
                }
            };
            values.push(y);
            for _ in 0..grid.steps() {
                for _ in 0..substeps {
                    y = decay * y + sigma * sampler.sample(stream);
                }
                values.push(y);
            }
        }
        Scheme::ExactBrownian => {
            if driver.kind != DrivingKind::BrownianMotion {
                return domain(format!("exact scheme is only available for Brownian motion, not {}", driver.kind));
            }
            let h = 1.0 / grid.per_period as f64;
            let decay = (-car1.a * h).exp();
            let innovation_mean = moments.mean * -(-car1.a * h).exp_m1();
            let innovation_sd = (moments.variance * -(-2.0 * car1.a * h).exp_m1()).sqrt();
            let mut y = match y0 {
                Some(v) => v,
                None => moments.mean + moments.variance.sqrt() * stream.std_normal(),
            };
            values.push(y);
            for _ in 0..grid.steps() {
                y = decay * y + innovation_mean + innovation_sd * stream.std_normal();
                values.push(y);
            }
        }
    }
    Path::new(grid, values)
}

/// Mean, variance and autocovariance decay of the stationary CAR(1) law.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StationaryMoments {
    pub mean: f64,
    pub variance: f64,
    pub rate: f64,
}

impl StationaryMoments {
    /// `Cov(Y(0), Y(s))`.
    pub fn autocov(&self, lag: f64) -> f64 {
        self.variance * (-self.rate * lag.abs()).exp()
    }

    pub fn autocorr(&self, lag: f64) -> f64 {
        (-self.rate * lag.abs()).exp()
    }
}

pub fn stationary_moments(car1: &Car1Params, levy: &LevyParams) -> StationaryMoments {
    StationaryMoments {
        mean: levy.mu * car1.sigma / car1.a,
        variance: car1.sigma * car1.sigma * levy.eta2 / (2.0 * car1.a),
        rate: car1.a,
    }
}
