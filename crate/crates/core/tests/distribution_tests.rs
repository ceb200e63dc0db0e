use levy_car1::gof::{family_cdf, fit_moments, procedure2_gof_test, Family, FamilyFit};
use levy_car1::rng::{derive_stream, GammaSampler, InverseGaussianSampler, Seed};
use levy_car1::special::ks_pvalue;

#[test]
fn normal_bootstrap_critical_matches_lilliefors() {
    // Lilliefors' large-sample 5% point for the estimated-parameter normal KS is 0.886/sqrt(n).
    let mut s = derive_stream(Seed(500), 0);
    let x: Vec<f64> = (0..100).map(|_| 3.0 + 2.0 * s.std_normal()).collect();
    let r = procedure2_gof_test(&x, Family::Normal, Seed(501), 2000, 0.05).unwrap();
    let crit = r.critical.unwrap();
    assert!((crit - 0.886).abs() < 0.05, "bootstrap critical {crit}");
}

#[test]
fn fitted_cdfs_describe_their_own_samples() {
    let n = 20_000;
    let mut s = derive_stream(Seed(502), 0);
    let g = GammaSampler::new(0.7, 2.0).unwrap();
    let ig = InverseGaussianSampler::new(1.5, 0.8).unwrap();
    for (fit, draws) in [
        (FamilyFit::Gamma { shape: 0.7, scale: 2.0 }, (0..n).map(|_| g.sample(&mut s)).collect::<Vec<_>>()),
        (FamilyFit::InverseGaussian { mean: 1.5, shape: 0.8 }, (0..n).map(|_| ig.sample(&mut s)).collect()),
    ] {
        let mut z: Vec<f64> = draws.iter().map(|&v| family_cdf(&fit, v).get()).collect();
        z.sort_by(f64::total_cmp);
        let d = z.iter().enumerate().fold(0.0f64, |acc, (i, &v)| {
            acc.max((i + 1) as f64 / n as f64 - v).max(v - i as f64 / n as f64)
        });
        let p = ks_pvalue(d, n).unwrap().get();
        assert!(p > 0.01, "{fit:?}: KS p {p}");
    }
}

#[test]
fn moment_fit_recovers_parameters() {
    let mut s = derive_stream(Seed(503), 0);
    let g = GammaSampler::new(2.0, 0.5).unwrap();
    let x: Vec<f64> = (0..200_000).map(|_| g.sample(&mut s)).collect();
    match fit_moments(&x, Family::Gamma).unwrap() {
        FamilyFit::Gamma { shape, scale } => {
            assert!((shape - 2.0).abs() < 0.05 && (scale - 0.5).abs() < 0.02, "{shape} {scale}");
        }
        other => panic!("{other:?}"),
    }
}

#[test]
fn bootstrap_is_thread_count_independent() {
    let mut s = derive_stream(Seed(504), 0);
    let ig = InverseGaussianSampler::new(1.0, 1.0).unwrap();
    let x: Vec<f64> = (0..80).map(|_| ig.sample(&mut s)).collect();
    let run = |threads| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap()
            .install(|| procedure2_gof_test(&x, Family::InverseGaussian, Seed(9), 300, 0.05).unwrap())
    };
    assert_eq!(run(1), run(8));
}
