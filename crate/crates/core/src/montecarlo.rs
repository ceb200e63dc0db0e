//! Monte Carlo estimation of empirical level and power: simulate, estimate,
//! recover, test, repeated `R` times with one derived stream per replicate.

use std::fmt::{self, Write as _};
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::estimate::{estimate, lsb_estimate, Estimator};
use crate::gof::{procedure1_bm_test, procedure2_gof_test, Family, KsSample, DEFAULT_BOOTSTRAP};
use crate::levy::{DrivingKind, LevyParams, DEFAULT_MIX_WEIGHT};
use crate::recover::recover_increments;
use crate::rng::{derive_stream, Seed, Stream};
use crate::simulate::{simulate_path, Car1Params, Driver, SamplingGrid, Scheme, DEFAULT_SUBSTEPS};
use crate::special::Probability;
use crate::whiteness::w_statistic;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TestKind {
    /// Lag-k uncorrelatedness test on the recovered increments.
    W,
    /// Bootstrap-parameter KS test for Brownian motion.
    P1,
    /// Parametric bootstrap `D_N` test for `family`.
    P2,
}

impl fmt::Display for TestKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            TestKind::W => "w",
            TestKind::P1 => "p1",
            TestKind::P2 => "p2",
        })
    }
}

impl FromStr for TestKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "w" | "whiteness" | "w-lag1" => Ok(TestKind::W),
            "p1" | "procedure1" | "1" => Ok(TestKind::P1),
            "p2" | "procedure2" | "2" => Ok(TestKind::P2),
            other => Err(Error::Parse(format!("unknown test '{other}' (w|p1|p2)"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub kind: DrivingKind,
    pub mu: f64,
    pub eta2: f64,
    pub a: f64,
    pub sigma: f64,
    pub n: usize,
    pub m: usize,
    pub replications: usize,
    pub alpha: f64,
    pub estimator: Estimator,
    /// False when `estimator` is the kind-dependent default.
    pub estimator_explicit: bool,
    pub test: TestKind,
    /// Family tested by `p2`.
    pub family: Family,
    pub bootstrap: usize,
    pub lag: usize,
    pub ks_on_resample: bool,
    pub seed: Seed,
    pub substeps: usize,
    /// Exact AR(1) transition for Brownian drivers instead of fine steps.
    pub bm_exact: bool,
    pub mix_weight: f64,
}

pub const CONFIG_KEYS: [&str; 20] = [
    "kind", "mu", "eta2", "a", "sigma", "n", "m", "replications", "alpha", "estimator", "test", "family",
    "bootstrap", "lag", "ks_on_resample", "seed", "substeps", "bm_exact", "mix_weight", "r",
];

/// DMB for subordinators, LSB for Brownian motion (DMB needs a positive path).
pub fn default_estimator(kind: DrivingKind) -> Estimator {
    if kind.is_subordinator() {
        Estimator::Dmb
    } else {
        Estimator::Lsb
    }
}

impl ExperimentConfig {
    pub fn new(kind: DrivingKind, a: f64) -> Self {
        Self {
            kind,
            mu: 1.0,
            eta2: 1.0,
            a,
            sigma: 1.0,
            n: 100,
            m: 100,
            replications: 400,
            alpha: 0.05,
            estimator: default_estimator(kind),
            estimator_explicit: false,
            test: TestKind::W,
            family: Family::Normal,
            bootstrap: DEFAULT_BOOTSTRAP,
            lag: 1,
            ks_on_resample: false,
            seed: Seed(0),
            substeps: DEFAULT_SUBSTEPS,
            bm_exact: true,
            mix_weight: DEFAULT_MIX_WEIGHT,
        }
    }

    /// Builds a config from `key=value` pairs over the defaults of [`ExperimentConfig::new`].
    pub fn from_pairs<'a>(pairs: impl IntoIterator<Item = (&'a str, &'a str)>) -> Result<Self> {
        let pairs: Vec<_> = pairs.into_iter().collect();
        let kind = match pairs.iter().rev().find(|(k, _)| *k == "kind") {
            Some((_, v)) => v.parse()?,
            None => DrivingKind::Gamma,
        };
        let mut cfg = Self::new(kind, 0.9);
        for (k, v) in pairs {
            cfg.set(k, v)?;
        }
        Ok(cfg)
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        fn num<T: FromStr>(key: &str, value: &str) -> Result<T> {
            value.trim().parse().map_err(|_| Error::Parse(format!("invalid value '{value}' for {key}")))
        }
        fn flag(key: &str, value: &str) -> Result<bool> {
            match value.trim().to_ascii_lowercase().as_str() {
                "1" | "true" | "yes" | "on" => Ok(true),
                "0" | "false" | "no" | "off" => Ok(false),
                _ => Err(Error::Parse(format!("invalid boolean '{value}' for {key}"))),
            }
        }
        match key.trim() {
            "kind" => {
                self.kind = value.parse()?;
                if !self.estimator_explicit {
                    self.estimator = default_estimator(self.kind);
                }
            }
            "mu" => self.mu = num(key, value)?,
            "eta2" => self.eta2 = num(key, value)?,
            "a" => self.a = num(key, value)?,
            "sigma" => self.sigma = num(key, value)?,
            "n" => self.n = num(key, value)?,
            "m" => self.m = num(key, value)?,
            "r" | "replications" => self.replications = num(key, value)?,
            "alpha" => self.alpha = num(key, value)?,
            "estimator" => {
                self.estimator = value.parse()?;
                self.estimator_explicit = true;
            }
            "test" => self.test = value.parse()?,
            "family" => self.family = value.parse()?,
            "bootstrap" => self.bootstrap = num(key, value)?,
            "lag" => self.lag = num(key, value)?,
            "ks_on_resample" => self.ks_on_resample = flag(key, value)?,
            "seed" => self.seed = Seed(num(key, value)?),
            "substeps" => self.substeps = num(key, value)?,
            "bm_exact" => self.bm_exact = flag(key, value)?,
            "mix_weight" => self.mix_weight = num(key, value)?,
            other => {
                return Err(Error::Parse(format!(
                    "unknown config key '{other}' (expected one of {})",
                    CONFIG_KEYS.join(", ")
                )))
            }
        }
        Ok(())
    }

    pub fn scheme(&self) -> Scheme {
        if self.kind == DrivingKind::BrownianMotion && self.bm_exact {
            Scheme::ExactBrownian
        } else {
            Scheme::FineStep { substeps: self.substeps }
        }
    }

    /// Family the configured test treats as the null, if it is a family test.
    pub fn null_family(&self) -> Option<Family> {
        match self.test {
            TestKind::W => None,
            TestKind::P1 => Some(Family::Normal),
            TestKind::P2 => Some(self.family),
        }
    }

    pub fn validate(&self) -> Result<()> {
        Car1Params::new(self.a, self.sigma)?;
        LevyParams::new(self.mu, self.eta2)?;
        let grid = SamplingGrid::new(self.n, self.m)?;
        if self.replications == 0 {
            return domain("replications must be at least 1");
        }
        Probability::new(self.alpha)?;
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return domain(format!("alpha must lie in (0, 1), got {}", self.alpha));
        }
        if self.substeps == 0 {
            return domain("substeps must be at least 1");
        }
        if self.bootstrap == 0 {
            return domain("bootstrap count must be at least 1");
        }
        if self.lag == 0 || self.lag >= grid.n_periods() {
            return domain(format!("lag must satisfy 1 <= lag < N, got {}", self.lag));
        }
        if !(self.mix_weight > 0.0 && self.mix_weight < 1.0) {
            return domain(format!("mix weight must lie in (0, 1), got {}", self.mix_weight));
        }
        if self.estimator == Estimator::Dmb && !self.kind.is_subordinator() {
            return domain(format!("the DMB estimator needs a positive driver, not {}", self.kind));
        }
        Ok(())
    }

    fn to_line(&self) -> String {
        format!(
            "kind={} a={} sigma={} mu={} eta2={} n={} m={} r={} alpha={} estimator={} test={} family={} \
             bootstrap={} lag={} ks_on_resample={} seed={} substeps={} bm_exact={} mix_weight={}",
            self.kind,
            self.a,
            self.sigma,
            self.mu,
            self.eta2,
            self.n,
            self.m,
            self.replications,
            self.alpha,
            self.estimator,
            self.test,
            self.family,
            self.bootstrap,
            self.lag,
            self.ks_on_resample,
            self.seed.0,
            self.substeps,
            self.bm_exact,
            self.mix_weight,
        )
    }
}

impl fmt::Display for ExperimentConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_line())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateResult {
    pub rejection_rate: Probability,
    pub rejections: usize,
    /// Replicates counted in the denominator.
    pub valid: usize,
    /// Replicates whose estimate, recovery or test degenerated.
    pub invalid: usize,
    /// Replicates where DMB met a nonpositive path and LSB was used.
    pub fallbacks: usize,
    pub replications: usize,
    pub standard_error: f64,
}

impl RateResult {
    fn from_counts(rejections: usize, valid: usize, invalid: usize, fallbacks: usize) -> Result<Self> {
        if valid == 0 {
            return Err(Error::Degenerate(format!("all {invalid} replicates were invalid")));
        }
        let p = rejections as f64 / valid as f64;
        Ok(Self {
            rejection_rate: Probability::new(p)?,
            rejections,
            valid,
            invalid,
            fallbacks,
            replications: valid + invalid,
            standard_error: (p * (1.0 - p) / valid as f64).sqrt(),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Outcome {
    Valid { reject: bool, fallback: bool },
    Invalid,
}

fn run_replicate(cfg: &ExperimentConfig, car1: &Car1Params, driver: &Driver, grid: &SamplingGrid, r: usize) -> Outcome {
    let mut stream = derive_stream(cfg.seed, r as u64);
    match replicate(cfg, car1, driver, grid, &mut stream) {
        Ok((reject, fallback)) => Outcome::Valid { reject, fallback },
        Err(e) => {
            log::debug!("replicate {r} invalid: {e}");
            Outcome::Invalid
        }
    }
}

fn replicate(
    cfg: &ExperimentConfig,
    car1: &Car1Params,
    driver: &Driver,
    grid: &SamplingGrid,
    stream: &mut Stream,
) -> Result<(bool, bool)> {
    let path = simulate_path(car1, driver, grid, cfg.scheme(), stream)?;
    let (rate, fallback) = match estimate(&path, cfg.estimator) {
        Ok(est) => (est, false),
        Err(Error::NonPositivePath { index, .. }) => {
            log::warn!("nonpositive path value at index {index}; falling back to LSB");
            (lsb_estimate(&path)?, true)
        }
        Err(e) => return Err(e),
    };
    let incr = recover_increments(&path, rate.a_hat, cfg.sigma)?;
    let reject = match cfg.test {
        TestKind::W => w_statistic(incr.values(), cfg.lag, cfg.alpha)?.reject,
        TestKind::P1 => {
            let ks = if cfg.ks_on_resample { KsSample::Resample } else { KsSample::Original };
            procedure1_bm_test(incr.values(), stream, cfg.alpha, ks)?.reject
        }
        TestKind::P2 => {
            let seed = stream.spawn_seed();
            procedure2_gof_test(incr.values(), cfg.family, seed, cfg.bootstrap, cfg.alpha)?.reject
        }
    };
    Ok((reject, fallback))
}

fn run_experiment(cfg: &ExperimentConfig) -> Result<RateResult> {
    cfg.validate()?;
    let car1 = Car1Params::new(cfg.a, cfg.sigma)?;
    let levy = LevyParams::new(cfg.mu, cfg.eta2)?;
    let grid = SamplingGrid::new(cfg.n, cfg.m)?;
    let driver = Driver { mix_weight: cfg.mix_weight, ..Driver::new(cfg.kind, levy) };

    let outcomes: Vec<Outcome> = (0..cfg.replications)
        .into_par_iter()
        .map(|r| run_replicate(cfg, &car1, &driver, &grid, r))
        .collect();

    let (mut rejections, mut valid, mut invalid, mut fallbacks) = (0, 0, 0, 0);
    for outcome in outcomes {
        match outcome {
            Outcome::Valid { reject, fallback } => {
                valid += 1;
                rejections += usize::from(reject);
                fallbacks += usize::from(fallback);
            }
            Outcome::Invalid => invalid += 1,
        }
    }
    if invalid > 0 {
        log::warn!("{invalid} of {} replicates were invalid and excluded", cfg.replications);
    }
    if fallbacks > 0 {
        log::warn!("{fallbacks} replicates fell back from DMB to LSB");
    }
    RateResult::from_counts(rejections, valid, invalid, fallbacks)
}

/// Empirical rejection rate under the null (driver and test agree).
pub fn run_level(cfg: &ExperimentConfig) -> Result<RateResult> {
    run_experiment(cfg)
}

/// Empirical rejection rate when the tested family differs from the driver.
pub fn run_power(cfg: &ExperimentConfig) -> Result<RateResult> {
    let driver_family = match cfg.kind {
        DrivingKind::BrownianMotion => Some(Family::Normal),
        DrivingKind::Gamma => Some(Family::Gamma),
        DrivingKind::InverseGaussian => Some(Family::InverseGaussian),
        DrivingKind::MixedIGGamma => None,
    };
    if cfg.null_family().is_some() && cfg.null_family() == driver_family {
        log::warn!("tested family matches the {} driver; this is a level run", cfg.kind);
    }
    run_experiment(cfg)
}

/// Runs `f` on a dedicated pool of `threads` workers.
pub fn with_threads<T: Send>(threads: usize, f: impl FnOnce() -> T + Send) -> Result<T> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| Error::Domain(format!("cannot build a {threads}-thread pool: {e}")))?;
    Ok(pool.install(f))
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TableRow {
    pub config: ExperimentConfig,
    pub result: std::result::Result<RateResult, String>,
}

/// Runs each config in order; a failing cell is reported in its row.
pub fn run_table(configs: &[ExperimentConfig]) -> Vec<TableRow> {
    configs
        .iter()
        .map(|cfg| TableRow { config: cfg.clone(), result: run_experiment(cfg).map_err(|e| e.to_string()) })
        .collect()
}

/// `key=value` tokens of one config line (whitespace or comma separated);
/// empty for blank and `#` comment lines.
pub fn config_line_pairs(line: &str) -> Result<Vec<(&str, &str)>> {
    let line = line.split('#').next().unwrap_or("").trim();
    line.split(|c: char| c.is_whitespace() || c == ',')
        .filter(|t| !t.is_empty())
        .map(|tok| tok.split_once('=').ok_or_else(|| Error::Parse(format!("expected key=value, got '{tok}'"))))
        .collect()
}

/// Parses a table spec: one experiment per line as `key=value` pairs; blank
/// lines and `#` comments are skipped.
pub fn parse_config_file(text: &str) -> Result<Vec<ExperimentConfig>> {
    let mut out = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let at_line = |e: Error| Error::Parse(format!("line {}: {e}", lineno + 1));
        let pairs = config_line_pairs(line).map_err(at_line)?;
        if pairs.is_empty() {
            continue;
        }
        out.push(ExperimentConfig::from_pairs(pairs).map_err(at_line)?);
    }
    Ok(out)
}

const TABLE_HEADER: [&str; 18] = [
    "kind", "a", "sigma", "mu", "eta2", "n", "m", "estimator", "test", "family", "alpha", "seed", "rate", "se",
    "rejections", "valid", "invalid", "fallbacks",
];

fn row_cells(row: &TableRow) -> Vec<String> {
    let c = &row.config;
    let family = if c.test == TestKind::P2 { c.family.to_string() } else { "-".into() };
    let mut cells = vec![
        c.kind.to_string(),
        c.a.to_string(),
        c.sigma.to_string(),
        c.mu.to_string(),
        c.eta2.to_string(),
        c.n.to_string(),
        c.m.to_string(),
        c.estimator.to_string(),
        c.test.to_string(),
        family,
        c.alpha.to_string(),
        c.seed.0.to_string(),
    ];
    match &row.result {
        Ok(r) => cells.extend([
            format!("{:.4}", r.rejection_rate.get()),
            format!("{:.4}", r.standard_error),
            r.rejections.to_string(),
            r.valid.to_string(),
            r.invalid.to_string(),
            r.fallbacks.to_string(),
        ]),
        Err(e) => {
            cells.extend(["error".to_string(), e.clone()]);
            cells.extend(std::iter::repeat_n(String::new(), 4));
        }
    }
    cells
}

pub fn table_csv(rows: &[TableRow]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(TABLE_HEADER)?;
    for row in rows {
        w.write_record(row_cells(row))?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
    String::from_utf8(bytes).map_err(|e| Error::Parse(e.to_string()))
}

pub fn table_text(rows: &[TableRow]) -> String {
    let cells: Vec<Vec<String>> = rows.iter().map(row_cells).collect();
    let mut widths: Vec<usize> = TABLE_HEADER.iter().map(|h| h.len()).collect();
    for row in &cells {
        for (w, cell) in widths.iter_mut().zip(row) {
            *w = (*w).max(cell.len());
        }
    }
    let mut out = String::new();
    let mut line = |cols: &mut dyn Iterator<Item = &str>| {
        let parts: Vec<String> = cols.zip(&widths).map(|(c, w)| format!("{c:>w$}")).collect();
        let _ = writeln!(out, "{}", parts.join("  ").trim_end());
    };
    line(&mut TABLE_HEADER.iter().copied());
    for row in &cells {
        line(&mut row.iter().map(String::as_str));
    }
    if rows.iter().any(|r| !r.config.estimator_explicit && r.config.null_family().is_some()) {
        out.push_str("note: estimator not set; dmb used for subordinator drivers and lsb for brownian motion\n");
    }
    out
}
