//! `car1`: simulate, estimate and verify Lévy-driven CAR(1) models, run Monte
//! Carlo level/power tables, and prepare spread or realized-volatility series.

use std::fs;
use std::path::{Path as FsPath, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use levy_car1::data::{
    intraday_returns, load_prices, pair_spread, parse_interval, read_column_file, realized_volatility, to_path,
    write_acf, write_increments, write_path, write_timed_series, TimedSeries,
};
use levy_car1::error::{Error, DMB_POSITIVITY_GUIDANCE};
use levy_car1::gof::{procedure1_bm_test, procedure2_gof_test, Family, GofProcedure, KsSample};
use levy_car1::montecarlo::{config_line_pairs, run_level, run_power, table_csv, table_text, ExperimentConfig, TableRow};
use levy_car1::simulate::{simulate_path, Car1Params, Driver, Path, SamplingGrid, Scheme};
use levy_car1::verify::{run_verification, VerifyOptions};
use levy_car1::{derive_stream, estimate, recover_increments, DrivingKind, Estimator, LevyParams, Seed};

#[derive(Parser, Debug)]
#[command(name = "car1", version, about = "Simulation and model verification for Lévy-driven CAR(1) processes")]
struct Cli {
    /// Master seed; every random draw derives from it.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,

    /// Worker threads for Monte Carlo and bootstrap loops (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,

    /// Directory for output files.
    #[arg(long, global = true, default_value = ".")]
    out: PathBuf,

    /// More log output (repeat for debug).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Simulate a stationary path and write it as `t,y`.
    Simulate(SimulateArgs),
    /// Estimate the mean-reversion rate of a path.
    Estimate(EstimateArgs),
    /// Recover the unit-period driving increments of a path (`n,dl`).
    Recover(RecoverArgs),
    /// Run the full verification: estimate, recover, whiteness test, family tests.
    Verify(VerifyArgs),
    /// Test increments against a driving family.
    Disttest(DisttestArgs),
    /// Monte Carlo empirical level.
    McLevel(McArgs),
    /// Monte Carlo empirical power (test family differs from the driver).
    McPower(McArgs),
    /// Log price spread of two stocks on their common timestamps.
    Spread(SpreadArgs),
    /// Daily realized volatility from intraday prices.
    Rv(RvArgs),
}

#[derive(Args, Debug)]
struct SimulateArgs {
    #[arg(long, default_value = "gamma")]
    kind: DrivingKind,
    #[arg(long)]
    a: f64,
    #[arg(long, default_value_t = 1.0)]
    sigma: f64,
    #[arg(long, default_value_t = 1.0)]
    mu: f64,
    #[arg(long, default_value_t = 1.0)]
    eta2: f64,
    /// Number of unit periods N.
    #[arg(long, default_value_t = 100)]
    n: usize,
    /// Observations per unit period M.
    #[arg(long, default_value_t = 100)]
    m: usize,
    /// Fine steps per observation interval.
    #[arg(long, default_value_t = 10)]
    substeps: usize,
    /// Gamma share of mean and variance for the mixed driver.
    #[arg(long, default_value_t = 0.5)]
    mix_weight: f64,
    /// Use fine steps for Brownian motion instead of the exact transition.
    #[arg(long)]
    fine: bool,
    /// Output file name inside --out.
    #[arg(long, default_value = "path.csv")]
    output: String,
}

#[derive(Args, Debug)]
struct PathInput {
    /// Path CSV with a `y` column.
    #[arg(long)]
    path: PathBuf,
    /// Observations per unit period M.
    #[arg(long)]
    per_period: usize,
    /// Unit periods N (default: as many as the file holds).
    #[arg(long)]
    periods: Option<usize>,
    /// Column holding the series.
    #[arg(long, default_value = "y")]
    column: String,
}

#[derive(Args, Debug)]
struct EstimateArgs {
    #[command(flatten)]
    input: PathInput,
    #[arg(long, value_enum, default_value = "lsb")]
    estimator: EstimatorArg,
}

#[derive(Args, Debug)]
struct RecoverArgs {
    #[command(flatten)]
    input: PathInput,
    #[arg(long, value_enum, default_value = "lsb")]
    estimator: EstimatorArg,
    /// Use this rate instead of estimating it.
    #[arg(long)]
    rate: Option<f64>,
    #[arg(long, default_value_t = 1.0)]
    sigma: f64,
    #[arg(long, default_value = "increments.csv")]
    output: String,
}

#[derive(Args, Debug)]
struct VerifyArgs {
    #[command(flatten)]
    input: PathInput,
    #[arg(long, value_enum, default_value = "lsb")]
    estimator: EstimatorArg,
    #[arg(long, default_value_t = 1.0)]
    sigma: f64,
    #[arg(long, default_value_t = 0.05)]
    alpha: f64,
    /// Lag of the whiteness statistic.
    #[arg(long, default_value_t = 1)]
    lag: usize,
    /// Candidate driving family for the distribution step (repeatable).
    #[arg(long, value_enum)]
    family: Vec<FamilyArg>,
    /// Procedure for the normal family (1 = bootstrap-parameter KS, 2 = parametric bootstrap).
    #[arg(long, default_value_t = 1, value_parser = clap::value_parser!(u8).range(1..=2))]
    procedure: u8,
    #[arg(long, default_value_t = 1000)]
    bootstrap: usize,
    /// Procedure 1: run the KS test on the resample instead of the original increments.
    #[arg(long)]
    ks_on_resample: bool,
    /// Run the distribution step even when the whiteness test rejects.
    #[arg(long)]
    force_step5: bool,
}

#[derive(Args, Debug)]
struct DisttestArgs {
    /// Increments CSV with a `dl` column.
    #[arg(long)]
    increments: PathBuf,
    #[arg(long, default_value = "dl")]
    column: String,
    #[arg(long, value_enum, default_value = "normal")]
    family: FamilyArg,
    /// 1 = bootstrap-parameter KS (normal only), 2 = parametric bootstrap.
    #[arg(long, default_value_t = 2, value_parser = clap::value_parser!(u8).range(1..=2))]
    procedure: u8,
    #[arg(long, default_value_t = 1000)]
    bootstrap: usize,
    #[arg(long, default_value_t = 0.05)]
    alpha: f64,
    #[arg(long)]
    ks_on_resample: bool,
}

#[derive(Args, Debug)]
struct McArgs {
    /// Table spec: one experiment per line as key=value pairs; flags below override every line.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    kind: Option<String>,
    #[arg(long)]
    a: Option<f64>,
    #[arg(long)]
    sigma: Option<f64>,
    #[arg(long)]
    mu: Option<f64>,
    #[arg(long)]
    eta2: Option<f64>,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    m: Option<usize>,
    /// Replications R.
    #[arg(long, short = 'r')]
    replications: Option<usize>,
    #[arg(long)]
    alpha: Option<f64>,
    /// lsb or dmb (default: dmb for subordinators, lsb for bm).
    #[arg(long)]
    estimator: Option<String>,
    /// w (whiteness), p1 (bootstrap-parameter KS for bm) or p2 (parametric bootstrap).
    #[arg(long)]
    test: Option<String>,
    /// Family tested by p2: normal, gamma or ig.
    #[arg(long)]
    family: Option<String>,
    #[arg(long)]
    bootstrap: Option<usize>,
    #[arg(long)]
    lag: Option<usize>,
    #[arg(long)]
    ks_on_resample: Option<bool>,
    #[arg(long)]
    substeps: Option<usize>,
    /// Exact transition for Brownian drivers (default true).
    #[arg(long)]
    bm_exact: Option<bool>,
    #[arg(long)]
    mix_weight: Option<f64>,
    /// Output base name inside --out (default: the subcommand name).
    #[arg(long)]
    output: Option<String>,
}

#[derive(Args, Debug)]
struct SpreadArgs {
    /// Prices of stock A.
    #[arg(long)]
    a: PathBuf,
    /// Prices of stock B.
    #[arg(long)]
    b: PathBuf,
    /// Price column (default: close, then price).
    #[arg(long)]
    column: Option<String>,
    #[arg(long, default_value = "spread.csv")]
    output: String,
}

#[derive(Args, Debug)]
struct RvArgs {
    /// Intraday prices.
    #[arg(long)]
    file: PathBuf,
    /// Return interval, e.g. 5m, 30s, 1h.
    #[arg(long, default_value = "5m")]
    interval: String,
    #[arg(long)]
    column: Option<String>,
    #[arg(long, default_value = "rv.csv")]
    output: String,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum EstimatorArg {
    Lsb,
    Dmb,
}

impl From<EstimatorArg> for Estimator {
    fn from(e: EstimatorArg) -> Self {
        match e {
            EstimatorArg::Lsb => Estimator::Lsb,
            EstimatorArg::Dmb => Estimator::Dmb,
        }
    }
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum FamilyArg {
    Normal,
    Gamma,
    Ig,
}

impl From<FamilyArg> for Family {
    fn from(f: FamilyArg) -> Self {
        match f {
            FamilyArg::Normal => Family::Normal,
            FamilyArg::Gamma => Family::Gamma,
            FamilyArg::Ig => Family::InverseGaussian,
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}

fn run(cli: Cli) -> Result<u8> {
    if let Some(threads) = cli.threads {
        if threads == 0 {
            bail!("--threads must be at least 1");
        }
        rayon::ThreadPoolBuilder::new().num_threads(threads).build_global().context("configuring threads")?;
    }
    fs::create_dir_all(&cli.out).with_context(|| format!("creating {}", cli.out.display()))?;
    let seed = Seed(cli.seed);
    let out = cli.out.as_path();
    match cli.command {
        Command::Simulate(args) => simulate(args, seed, out),
        Command::Estimate(args) => estimate_cmd(args),
        Command::Recover(args) => recover(args, out),
        Command::Verify(args) => verify(args, seed, out),
        Command::Disttest(args) => disttest(args, seed, out),
        Command::McLevel(args) => monte_carlo(args, seed, out, "mc-level", false),
        Command::McPower(args) => monte_carlo(args, seed, out, "mc-power", true),
        Command::Spread(args) => spread(args, out),
        Command::Rv(args) => rv(args, out),
    }
}

fn create(out: &FsPath, name: &str) -> Result<fs::File> {
    let p = out.join(name);
    fs::File::create(&p).with_context(|| format!("creating {}", p.display()))
}

fn simulate(args: SimulateArgs, seed: Seed, out: &FsPath) -> Result<u8> {
    let car1 = Car1Params::new(args.a, args.sigma)?;
    let driver = Driver { mix_weight: args.mix_weight, ..Driver::new(args.kind, LevyParams::new(args.mu, args.eta2)?) };
    let grid = SamplingGrid::new(args.n, args.m)?;
    let scheme = if args.kind == DrivingKind::BrownianMotion && !args.fine {
        Scheme::ExactBrownian
    } else {
        Scheme::FineStep { substeps: args.substeps }
    };
    let path = simulate_path(&car1, &driver, &grid, scheme, &mut derive_stream(seed, 0))?;
    write_path(&path, create(out, &args.output)?)?;
    println!("wrote {} points to {}", path.values().len(), out.join(&args.output).display());
    Ok(0)
}

fn load_path(input: &PathInput) -> Result<(Path, Option<String>)> {
    let values = read_column_file(&input.path, &input.column)
        .with_context(|| format!("reading {}", input.path.display()))?;
    let m = input.per_period;
    if m == 0 {
        bail!("--per-period must be at least 1");
    }
    let n = match input.periods {
        Some(n) => n,
        None => (values.len().saturating_sub(1)) / m,
    };
    if n == 0 {
        bail!("{} holds {} points, fewer than one period of M = {m}", input.path.display(), values.len());
    }
    let (path, mapping) = to_path(&values, SamplingGrid::new(n, m)?)?;
    let note = (mapping.used != mapping.total).then(|| {
        format!("used {} of {} points (stride {})", mapping.used, mapping.total, mapping.stride)
    });
    Ok((path, note))
}

fn estimate_cmd(args: EstimateArgs) -> Result<u8> {
    let (path, note) = load_path(&args.input)?;
    if let Some(note) = note {
        log::warn!("{note}");
    }
    match estimate(&path, args.estimator.into()) {
        Ok(e) => {
            println!("a_hat = {} ({})", e.a_hat, e.method);
            Ok(0)
        }
        Err(Error::NonPositivePath { .. }) => {
            eprintln!("{DMB_POSITIVITY_GUIDANCE}");
            Ok(1)
        }
        Err(e) => Err(e.into()),
    }
}

fn recover(args: RecoverArgs, out: &FsPath) -> Result<u8> {
    let (path, _) = load_path(&args.input)?;
    let a = match args.rate {
        Some(a) => a,
        None => match estimate(&path, args.estimator.into()) {
            Ok(e) => e.a_hat,
            Err(Error::NonPositivePath { .. }) => {
                eprintln!("{DMB_POSITIVITY_GUIDANCE}");
                return Ok(1);
            }
            Err(e) => return Err(e.into()),
        },
    };
    let incr = recover_increments(&path, a, args.sigma)?;
    write_increments(incr.values(), create(out, &args.output)?)?;
    println!("a = {a}; wrote {} increments to {}", incr.len(), out.join(&args.output).display());
    Ok(0)
}

fn verify(args: VerifyArgs, seed: Seed, out: &FsPath) -> Result<u8> {
    let (path, note) = load_path(&args.input)?;
    let options = VerifyOptions {
        estimator: args.estimator.into(),
        sigma: args.sigma,
        alpha: args.alpha,
        lag: args.lag,
        families: args.family.iter().map(|&f| f.into()).collect(),
        normal_procedure: if args.procedure == 1 { GofProcedure::BootstrapKs } else { GofProcedure::ParametricBootstrap },
        bootstrap: args.bootstrap,
        ks_on_resample: args.ks_on_resample,
        force_step5: args.force_step5,
        seed,
        ..VerifyOptions::default()
    };
    let mut v = run_verification(&path, &args.input.path.display().to_string(), &options);
    v.report.invocation = std::env::args().collect();
    if let Some(note) = note {
        v.report.warnings.push(note);
    }

    let json = serde_json::to_string_pretty(&v.report)?;
    fs::write(out.join("report.json"), json + "\n").context("writing report.json")?;
    let text = v.report.to_text();
    fs::write(out.join("report.txt"), &text).context("writing report.txt")?;
    if let Some(incr) = &v.increments {
        write_increments(incr.values(), create(out, "increments.csv")?)?;
    }
    if let Some(acf) = &v.acf {
        write_acf(acf, create(out, "acf.csv")?)?;
    }
    print!("{text}");
    Ok(v.report.exit_code() as u8)
}

fn disttest(args: DisttestArgs, seed: Seed, out: &FsPath) -> Result<u8> {
    let x = read_column_file(&args.increments, &args.column)
        .with_context(|| format!("reading {}", args.increments.display()))?;
    let family: Family = args.family.into();
    let result = if args.procedure == 1 {
        if family != Family::Normal {
            bail!("procedure 1 tests the normal family only; use --procedure 2 for {family}");
        }
        let ks = if args.ks_on_resample { KsSample::Resample } else { KsSample::Original };
        procedure1_bm_test(&x, &mut derive_stream(seed, 0), args.alpha, ks)?
    } else {
        procedure2_gof_test(&x, family, derive_stream(seed, 0).spawn_seed(), args.bootstrap, args.alpha)?
    };
    fs::write(out.join("disttest.json"), serde_json::to_string_pretty(&result)? + "\n")
        .context("writing disttest.json")?;
    match (result.critical, result.p_value) {
        (Some(c), _) => println!("{family}: D_N = {:.6}, critical {:.6}", result.statistic, c),
        (None, Some(p)) => println!("{family}: KS = {:.6}, p-value {:.6}", result.statistic, p),
        _ => println!("{family}: statistic {:.6}", result.statistic),
    }
    println!("{}", if result.reject { "reject" } else { "fail to reject" });
    Ok(0)
}

impl McArgs {
    fn overrides(&self) -> Vec<(&'static str, String)> {
        let mut v = Vec::new();
        let mut put = |k: &'static str, val: Option<String>| {
            if let Some(val) = val {
                v.push((k, val));
            }
        };
        put("kind", self.kind.clone());
        put("a", self.a.map(|x| x.to_string()));
        put("sigma", self.sigma.map(|x| x.to_string()));
        put("mu", self.mu.map(|x| x.to_string()));
        put("eta2", self.eta2.map(|x| x.to_string()));
        put("n", self.n.map(|x| x.to_string()));
        put("m", self.m.map(|x| x.to_string()));
        put("replications", self.replications.map(|x| x.to_string()));
        put("alpha", self.alpha.map(|x| x.to_string()));
        put("estimator", self.estimator.clone());
        put("test", self.test.clone());
        put("family", self.family.clone());
        put("bootstrap", self.bootstrap.map(|x| x.to_string()));
        put("lag", self.lag.map(|x| x.to_string()));
        put("ks_on_resample", self.ks_on_resample.map(|x| x.to_string()));
        put("substeps", self.substeps.map(|x| x.to_string()));
        put("bm_exact", self.bm_exact.map(|x| x.to_string()));
        put("mix_weight", self.mix_weight.map(|x| x.to_string()));
        v
    }
}

fn monte_carlo(args: McArgs, seed: Seed, out: &FsPath, name: &str, power: bool) -> Result<u8> {
    let seed_pair = ("seed", seed.0.to_string());
    let overrides = args.overrides();
    let build = |line_pairs: Vec<(&str, &str)>| -> Result<ExperimentConfig> {
        let pairs = std::iter::once((seed_pair.0, seed_pair.1.as_str()))
            .chain(line_pairs)
            .chain(overrides.iter().map(|(k, v)| (*k, v.as_str())));
        Ok(ExperimentConfig::from_pairs(pairs)?)
    };
    let configs = match &args.config {
        Some(file) => {
            let text = fs::read_to_string(file).with_context(|| format!("reading {}", file.display()))?;
            let mut configs = Vec::new();
            for (i, line) in text.lines().enumerate() {
                let pairs = config_line_pairs(line).with_context(|| format!("{} line {}", file.display(), i + 1))?;
                if !pairs.is_empty() {
                    configs.push(build(pairs).with_context(|| format!("{} line {}", file.display(), i + 1))?);
                }
            }
            configs
        }
        None => vec![build(Vec::new())?],
    };

    let rows: Vec<TableRow> = configs
        .iter()
        .map(|cfg| {
            let result = if power { run_power(cfg) } else { run_level(cfg) };
            TableRow { config: cfg.clone(), result: result.map_err(|e| e.to_string()) }
        })
        .collect();
    let base = args.output.as_deref().unwrap_or(name);
    fs::write(out.join(format!("{base}.csv")), table_csv(&rows)?).context("writing table csv")?;
    let text = table_text(&rows);
    fs::write(out.join(format!("{base}.txt")), &text).context("writing table text")?;
    print!("{text}");
    Ok(if rows.iter().any(|r| r.result.is_err()) { 1 } else { 0 })
}

fn spread(args: SpreadArgs, out: &FsPath) -> Result<u8> {
    let column = args.column.as_deref();
    let (a, ra) = load_prices(&args.a, column).with_context(|| format!("reading {}", args.a.display()))?;
    let (b, rb) = load_prices(&args.b, column).with_context(|| format!("reading {}", args.b.display()))?;
    let y = pair_spread(&a, &b)?;
    write_timed_series(&y, create(out, &args.output)?)?;
    println!(
        "spread: {} common points (A: {} kept, {} dropped; B: {} kept, {} dropped) -> {}",
        y.values.len(),
        a.len(),
        ra.dropped,
        b.len(),
        rb.dropped,
        out.join(&args.output).display()
    );
    Ok(0)
}

fn rv(args: RvArgs, out: &FsPath) -> Result<u8> {
    let interval = parse_interval(&args.interval)?;
    let (prices, report) =
        load_prices(&args.file, args.column.as_deref()).with_context(|| format!("reading {}", args.file.display()))?;
    let days = intraday_returns(&prices, interval)?;
    let series: TimedSeries = realized_volatility(&days);
    if series.values.is_empty() {
        bail!("no day has an intraday return at interval {}", args.interval);
    }
    write_timed_series(&series, create(out, &args.output)?)?;
    println!(
        "rv: {} days from {} prices ({} dropped) -> {}",
        series.values.len(),
        prices.len(),
        report.dropped,
        out.join(&args.output).display()
    );
    Ok(0)
}
