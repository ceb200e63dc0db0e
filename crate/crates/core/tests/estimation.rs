use levy_car1::estimate::{estimate, Estimator};
use levy_car1::levy::{DrivingKind, LevyParams};
use levy_car1::recover::recover_increments;
use levy_car1::rng::{derive_stream, Seed};
use levy_car1::simulate::{simulate_path, Car1Params, Driver, SamplingGrid, Scheme};
use levy_car1::whiteness::sample_moments;

fn median_abs_error(kind: DrivingKind, method: Estimator, a: f64, n: usize, reps: u64) -> f64 {
    let levy = LevyParams::new(1.0, 1.0).unwrap();
    let car1 = Car1Params::new(a, 1.0).unwrap();
    let grid = SamplingGrid::new(n, 20).unwrap();
    let mut errs: Vec<f64> = (0..reps)
        .map(|r| {
            let mut s = derive_stream(Seed(400 + n as u64), r);
            let path = simulate_path(&car1, &Driver::new(kind, levy), &grid, Scheme::default(), &mut s).unwrap();
            (estimate(&path, method).unwrap().a_hat - a).abs()
        })
        .collect();
    errs.sort_by(f64::total_cmp);
    errs[errs.len() / 2]
}

#[test]
fn estimators_are_consistent_in_n() {
    for (kind, method) in [
        (DrivingKind::Gamma, Estimator::Lsb),
        (DrivingKind::Gamma, Estimator::Dmb),
        (DrivingKind::BrownianMotion, Estimator::Lsb),
    ] {
        let short = median_abs_error(kind, method, 2.0, 25, 40);
        let long = median_abs_error(kind, method, 2.0, 400, 40);
        assert!(long <= short, "{kind} {method}: {short} -> {long}");
        assert!(long < 0.15 * 2.0, "{kind} {method}: {long}");
    }
}

#[test]
fn recovered_increments_match_the_driver_moments() {
    let levy = LevyParams::new(1.0, 1.0).unwrap();
    let car1 = Car1Params::new(0.9, 1.0).unwrap();
    let grid = SamplingGrid::new(2000, 50).unwrap();
    let mut s = derive_stream(Seed(410), 0);
    let path = simulate_path(&car1, &Driver::new(DrivingKind::Gamma, levy), &grid, Scheme::default(), &mut s).unwrap();
    let incr = recover_increments(&path, 0.9, 1.0).unwrap();
    let m = sample_moments(incr.values()).unwrap();
    // SE of the mean is about 1/sqrt(2000) = 0.022.
    assert!((m.mean - 1.0).abs() < 0.1, "{m:?}");
    assert!((m.eta2_hat - 1.0).abs() < 0.2, "{m:?}");
}
