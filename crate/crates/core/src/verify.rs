//! Model verification of a single sampled path: estimate `a`, recover the
//! increments, test them for serial correlation and, when that test does not
//! reject, test candidate driving families.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, DMB_POSITIVITY_GUIDANCE};
use crate::estimate::{estimate, Estimator, RateEstimate};
use crate::gof::{procedure1_bm_test, procedure2_gof_test, Family, GofProcedure, GofResult, KsSample, DEFAULT_BOOTSTRAP};
use crate::recover::{recover_increments, IncrementSeries};
use crate::rng::{derive_stream, Seed};
use crate::simulate::Path;
use crate::whiteness::{acf, sample_moments, w_statistic, WhitenessResult, DEFAULT_ALPHA, DEFAULT_LAG};

/// Below this many periods the normal approximation for `W` is unreliable.
pub const SMALL_SAMPLE_N: usize = 50;
pub const DEFAULT_ACF_LAGS: usize = 40;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerifyOptions {
    pub estimator: Estimator,
    pub sigma: f64,
    pub alpha: f64,
    pub lag: usize,
    /// Candidate families for the distribution step.
    pub families: Vec<Family>,
    /// Procedure used for the normal family; other families always use the parametric bootstrap.
    pub normal_procedure: GofProcedure,
    pub bootstrap: usize,
    pub ks_on_resample: bool,
    pub force_step5: bool,
    pub seed: Seed,
    pub acf_lags: usize,
}

impl Default for VerifyOptions {
    fn default() -> Self {
        Self {
            estimator: Estimator::Lsb,
            sigma: 1.0,
            alpha: DEFAULT_ALPHA,
            lag: DEFAULT_LAG,
            families: Vec::new(),
            normal_procedure: GofProcedure::BootstrapKs,
            bootstrap: DEFAULT_BOOTSTRAP,
            ks_on_resample: false,
            force_step5: false,
            seed: Seed(0),
            acf_lags: DEFAULT_ACF_LAGS,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    FailToReject,
    RejectWhiteness,
    RejectFamily,
    Error,
}

impl std::fmt::Display for Verdict {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Verdict::FailToReject => "fail to reject",
            Verdict::RejectWhiteness => "reject: increments are serially correlated",
            Verdict::RejectFamily => "reject: no candidate family fits",
            Verdict::Error => "error",
        })
    }
}

impl Verdict {
    pub fn exit_code(self) -> i32 {
        match self {
            Verdict::FailToReject => 0,
            Verdict::Error => 1,
            Verdict::RejectWhiteness => 2,
            Verdict::RejectFamily => 3,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IncrementSummary {
    pub count: usize,
    pub mean: f64,
    /// Divisor `N`.
    pub variance: f64,
    pub min: f64,
    pub max: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerificationReport {
    pub source: String,
    /// Command line or other caller context, echoed verbatim.
    pub invocation: Vec<String>,
    pub n_periods: usize,
    pub per_period: usize,
    pub options: VerifyOptions,
    pub estimate: Option<RateEstimate>,
    pub increments: Option<IncrementSummary>,
    pub whiteness: Option<WhitenessResult>,
    pub step5_run: bool,
    pub gof: Vec<GofResult>,
    pub warnings: Vec<String>,
    pub error: Option<String>,
    pub verdict: Verdict,
}

impl VerificationReport {
    pub fn exit_code(&self) -> i32 {
        self.verdict.exit_code()
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "source: {}", self.source);
        let _ = writeln!(s, "grid: N={} M={}", self.n_periods, self.per_period);
        if let Some(e) = &self.estimate {
            let _ = writeln!(s, "step 1-2: a_hat = {:.6} ({})", e.a_hat, e.method);
        }
        if let Some(inc) = &self.increments {
            let _ = writeln!(
                s,
                "step 3: {} increments, mean {:.6}, variance {:.6}, range [{:.6}, {:.6}]",
                inc.count, inc.mean, inc.variance, inc.min, inc.max
            );
        }
        if let Some(w) = &self.whiteness {
            let _ = writeln!(
                s,
                "step 4: W({}) = {:.6}, critical {:.6} at alpha {} -> {}",
                w.lag,
                w.w_stat,
                w.critical,
                w.alpha,
                if w.reject { "reject" } else { "fail to reject" }
            );
        }
        if self.step5_run {
            for g in &self.gof {
                let detail = match (g.procedure, g.critical, g.p_value) {
                    (GofProcedure::ParametricBootstrap, Some(c), _) => format!("D_N = {:.6}, critical {:.6}", g.statistic, c),
                    (_, _, Some(p)) => format!("KS = {:.6}, p-value {:.6}", g.statistic, p),
                    _ => format!("statistic {:.6}", g.statistic),
                };
                let _ = writeln!(
                    s,
                    "step 5: {} family: {} -> {}",
                    g.family,
                    detail,
                    if g.reject { "reject" } else { "fail to reject" }
                );
            }
        } else if !self.options.families.is_empty() {
            let _ = writeln!(s, "step 5: skipped (increments are serially correlated)");
        }
        for w in &self.warnings {
            let _ = writeln!(s, "warning: {w}");
        }
        if let Some(e) = &self.error {
            let _ = writeln!(s, "error: {e}");
        }
        let _ = writeln!(s, "verdict: {} (exit {})", self.verdict, self.exit_code());
        s
    }
}

/// Report plus the plot data behind it.
#[derive(Debug, Clone)]
pub struct Verification {
    pub report: VerificationReport,
    pub increments: Option<IncrementSeries>,
    pub acf: Option<Vec<f64>>,
}

/// Runs every step; failures end up in the report with [`Verdict::Error`].
pub fn run_verification(path: &Path, source: &str, options: &VerifyOptions) -> Verification {
    let grid = path.grid();
    let mut report = VerificationReport {
        source: source.to_string(),
        invocation: Vec::new(),
        n_periods: grid.n_periods(),
        per_period: grid.per_period(),
        options: options.clone(),
        estimate: None,
        increments: None,
        whiteness: None,
        step5_run: false,
        gof: Vec::new(),
        warnings: Vec::new(),
        error: None,
        verdict: Verdict::Error,
    };
    if grid.n_periods() <= SMALL_SAMPLE_N {
        report.warnings.push(format!(
            "N = {} <= {SMALL_SAMPLE_N}: the normal approximation for W may be poor",
            grid.n_periods()
        ));
    }
    let mut out = Verification { report, increments: None, acf: None };
    if let Err(e) = steps(path, options, &mut out) {
        out.report.error = Some(match e {
            Error::NonPositivePath { .. } => DMB_POSITIVITY_GUIDANCE.to_string(),
            other => other.to_string(),
        });
        out.report.verdict = Verdict::Error;
    }
    out
}

fn steps(path: &Path, options: &VerifyOptions, out: &mut Verification) -> crate::Result<()> {
    let report = &mut out.report;
    let est = estimate(path, options.estimator)?;
    report.estimate = Some(est);
    if est.a_hat <= 0.0 {
        report.warnings.push(format!("a_hat = {} is not positive; the path may not mean-revert", est.a_hat));
    }

    let incr = recover_increments(path, est.a_hat, options.sigma)?;
    let x = incr.values();
    let moments = sample_moments(x)?;
    report.increments = Some(IncrementSummary {
        count: x.len(),
        mean: moments.mean,
        variance: moments.eta2_hat,
        min: x.iter().copied().fold(f64::INFINITY, f64::min),
        max: x.iter().copied().fold(f64::NEG_INFINITY, f64::max),
    });

    let w: WhitenessResult = w_statistic(x, options.lag, options.alpha)?;
    let w_reject = w.reject;
    report.whiteness = Some(w);
    out.acf = acf(x, options.acf_lags.min(x.len() - 1)).ok();

    report.verdict = if w_reject { Verdict::RejectWhiteness } else { Verdict::FailToReject };
    if (!w_reject || options.force_step5) && !options.families.is_empty() {
        report.step5_run = true;
        if w_reject {
            report.warnings.push("distribution step forced although the increments are serially correlated".into());
        }
        for (i, &family) in options.families.iter().enumerate() {
            let mut stream = derive_stream(options.seed, i as u64);
            let result = if family == Family::Normal && options.normal_procedure == GofProcedure::BootstrapKs {
                let ks = if options.ks_on_resample { KsSample::Resample } else { KsSample::Original };
                procedure1_bm_test(x, &mut stream, options.alpha, ks)?
            } else {
                procedure2_gof_test(x, family, stream.spawn_seed(), options.bootstrap, options.alpha)?
            };
            report.gof.push(result);
        }
        // Every candidate rejected means no family fits.
        if !w_reject && report.gof.iter().all(|g| g.reject) {
            report.verdict = Verdict::RejectFamily;
        }
    }
    out.increments = Some(incr);
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::levy::{DrivingKind, LevyParams};
    use crate::simulate::{simulate_path, Car1Params, Driver, SamplingGrid, Scheme};

    fn bm_path(seed: u64, n: usize) -> Path {
        let car1 = Car1Params::new(5.0, 1.0).unwrap();
        let driver = Driver::new(DrivingKind::BrownianMotion, LevyParams::new(1.0, 1.0).unwrap());
        let grid = SamplingGrid::new(n, 50).unwrap();
        simulate_path(&car1, &driver, &grid, Scheme::ExactBrownian, &mut derive_stream(Seed(seed), 0)).unwrap()
    }

    #[test]
    fn bm_path_passes_and_round_trips() {
        let opts = VerifyOptions { families: vec![Family::Normal], ..VerifyOptions::default() };
        let v = run_verification(&bm_path(11, 100), "sim", &opts);
        let r = &v.report;
        assert!(r.error.is_none(), "{:?}", r.error);
        assert_eq!(v.increments.as_ref().unwrap().len(), 100);
        assert_eq!(v.acf.as_ref().unwrap().len(), 41);
        assert!(r.warnings.is_empty());
        let json = serde_json::to_string(r).unwrap();
        let back: VerificationReport = serde_json::from_str(&json).unwrap();
        assert_eq!(&back, r);
        assert!(r.to_text().contains("verdict"));
    }

    #[test]
    fn dmb_on_negative_path_reports_guidance() {
        let opts = VerifyOptions { estimator: Estimator::Dmb, ..VerifyOptions::default() };
        let mut values = bm_path(12, 20).into_values();
        values[3] = -1.0;
        let path = Path::new(SamplingGrid::new(20, 50).unwrap(), values).unwrap();
        let r = run_verification(&path, "neg", &opts).report;
        assert_eq!(r.verdict, Verdict::Error);
        assert_eq!(r.exit_code(), 1);
        assert_eq!(r.error.as_deref(), Some(DMB_POSITIVITY_GUIDANCE));
        assert!(r.warnings[0].contains("N = 20"));
    }

    #[test]
    fn step5_gated_by_whiteness() {
        // A slowly oscillating path gives strongly correlated increments.
        let grid = SamplingGrid::new(100, 10).unwrap();
        let values: Vec<f64> = (0..grid.len()).map(|i| (i as f64 / 40.0).sin() + 2.0).collect();
        let path = Path::new(grid, values).unwrap();
        let opts = VerifyOptions { families: vec![Family::Normal], ..VerifyOptions::default() };
        let r = run_verification(&path, "sine", &opts).report;
        assert_eq!(r.verdict, Verdict::RejectWhiteness);
        assert_eq!(r.exit_code(), 2);
        assert!(!r.step5_run && r.gof.is_empty());

        let forced = VerifyOptions { force_step5: true, ..opts };
        let r = run_verification(&path, "sine", &forced).report;
        assert!(r.step5_run);
        assert_eq!(r.gof.len(), 1);
        assert_eq!(r.verdict, Verdict::RejectWhiteness);
    }
}
