use levy_car1::levy::DrivingKind;
use levy_car1::montecarlo::{run_level, run_table, table_csv, with_threads, ExperimentConfig, TestKind};
use levy_car1::gof::Family;
use levy_car1::rng::Seed;

fn bm_cell(seed: u64, r: usize) -> ExperimentConfig {
    ExperimentConfig { n: 50, m: 20, replications: r, seed: Seed(seed), ..ExperimentConfig::new(DrivingKind::BrownianMotion, 2.0) }
}

#[test]
fn identical_across_thread_counts() {
    for cfg in [
        ExperimentConfig { n: 40, m: 20, replications: 40, seed: Seed(600), ..ExperimentConfig::new(DrivingKind::Gamma, 0.9) },
        ExperimentConfig {
            n: 40,
            m: 20,
            replications: 12,
            test: TestKind::P2,
            family: Family::Gamma,
            bootstrap: 100,
            seed: Seed(601),
            ..ExperimentConfig::new(DrivingKind::MixedIGGamma, 0.9)
        },
        ExperimentConfig { test: TestKind::P1, ..bm_cell(602, 60) },
    ] {
        let one = with_threads(1, || run_level(&cfg)).unwrap().unwrap();
        let eight = with_threads(8, || run_level(&cfg)).unwrap().unwrap();
        assert_eq!(one, eight, "{cfg}");
    }
}

#[test]
fn pooled_small_runs_agree_with_one_large_run() {
    let (mut rejections, mut valid) = (0usize, 0usize);
    for k in 0..20 {
        let r = run_level(&bm_cell(1_000 + k, 100)).unwrap();
        rejections += r.rejections;
        valid += r.valid;
    }
    let pooled = rejections as f64 / valid as f64;
    let big = run_level(&bm_cell(7_777, 2000)).unwrap();
    let p = big.rejection_rate.get();
    let pbar = (rejections + big.rejections) as f64 / (valid + big.valid) as f64;
    let se = (pbar * (1.0 - pbar) * (1.0 / valid as f64 + 1.0 / big.valid as f64)).sqrt();
    assert!((pooled - p).abs() <= 3.0 * se, "pooled {pooled} vs {p} (se {se})");
}

#[test]
fn duplicate_cells_are_identical() {
    let cfg = bm_cell(5, 50);
    let rows = run_table(&[cfg.clone(), cfg]);
    assert_eq!(rows[0].result, rows[1].result);
    let csv = table_csv(&rows).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[1], lines[2]);
}
