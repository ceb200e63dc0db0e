//! Simulation, estimation and driving-noise diagnostics for Lévy-driven CAR(1)
//! (Ornstein–Uhlenbeck type) processes.

pub mod data;
pub mod error;
pub mod estimate;
pub mod gof;
pub mod levy;
pub mod montecarlo;
pub mod recover;
pub mod rng;
pub mod simulate;
pub mod special;
pub mod verify;
pub mod whiteness;

pub use error::{Error, Result};
pub use estimate::{estimate, Estimator, RateEstimate};
pub use levy::{DrivingKind, LevyParams};
pub use recover::{recover_increments, IncrementSeries};
pub use rng::{derive_stream, Seed, Stream};
pub use simulate::{simulate_path, Car1Params, Driver, Path, SamplingGrid, Scheme};
