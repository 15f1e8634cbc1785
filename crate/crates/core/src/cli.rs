//! Command-line front end.
//!
//! Flag values can also come from a JSON config file (`--config` or the
//! `RANDKERN_CONFIG` environment variable). Keys are flag names; nested
//! objects are flattened one level, so a file written by `calibrate` can be
//! fed back in. Flags given on the command line always win.

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::parser::ValueSource;
use clap::{ArgMatches, Args, CommandFactory, FromArgMatches, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::Value;

use crate::attack::{simulate, NoiseFamily, NoiseSpec};
use crate::bounds::BoundConfig;
use crate::error::{invalid, Error, Result};
use crate::experiments::{
    self, BetaSpec, CalibrationPlan, ExperimentPlan, ExperimentRecord, KernelRule,
    DEFAULT_MEMORY_CEILING,
};
use crate::kernels::{build_kernel_matrix, KernelSpec};
use crate::krr::fit;
use crate::matrix::Matrix;
use crate::sampling::{derive_seed, sample, DistributionFamily, DistributionSpec, SampleSet};
use crate::spectral::{spectral_norm_with, SpectralOptions, DEFAULT_TOLERANCE};

pub const CONFIG_ENV: &str = "RANDKERN_CONFIG";

#[derive(Debug, Parser)]
#[command(
    name = "randkern",
    version,
    about = "Random kernel matrices: spectral norms, bounds and reconstruction attacks"
)]
pub struct Cli {
    /// Worker threads (default: available parallelism)
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// JSON file of default flag values
    #[arg(long, global = true, env = CONFIG_ENV)]
    config: Option<PathBuf>,
    /// Write the primary output here instead of stdout
    #[arg(long, short = 'o', global = true)]
    output: Option<PathBuf>,
    /// Where sweeps write their JSON sidecar (default: OUTPUT.meta.json)
    #[arg(long, global = true)]
    sidecar: Option<PathBuf>,
    /// Increase log verbosity
    #[arg(long, short = 'v', action = clap::ArgAction::Count, global = true)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Draw a sample set and print it as CSV
    Sample(SampleCmd),
    /// Print the kernel matrix of a sample set as CSV
    KernelMatrix(KernelMatrixCmd),
    /// Spectral norm of a kernel matrix, as JSON
    SpectralNorm(SpectralNormCmd),
    /// Polynomial-kernel norms against the closed-form bound
    Figure1(Figure1Cmd),
    /// Gaussian-kernel norms at a = (2+delta)ln(n)/d
    Figure2(Figure2Cmd),
    /// Gaussian-kernel norms at small bandwidth a = coef/d
    LowerRegime(LowerRegimeCmd),
    /// Gaussian-kernel norms on the zero-or-sphere mixture
    Mixture(MixtureCmd),
    /// Fit the polynomial-bound constant C0 to measured norms
    Calibrate(CalibrateCmd),
    /// Fit kernel ridge regression and export the model as JSON
    Krr(KrrCmd),
    /// Noisy coefficient release followed by the reconstruction attack
    Attack(AttackCmd),
    /// Attack success across a grid of noise levels
    PrivacySweep(PrivacySweepCmd),
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum DistArg {
    Normal,
    Rademacher,
    Sphere,
    Bounded,
    Mixture,
}

#[derive(Clone, Copy, Debug, PartialEq, ValueEnum)]
enum KernelArg {
    Poly,
    Gaussian,
    Laplacian,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum NoiseArg {
    Uniform,
    Gaussian,
    Laplace,
}

#[derive(Debug, Args)]
struct DistArgs {
    /// Sampling distribution
    #[arg(long, value_enum, default_value = "normal")]
    dist: DistArg,
    /// Radius of the sphere distribution
    #[arg(long, default_value_t = 1.0)]
    radius: f64,
    /// Half-width of the bounded distribution
    #[arg(long, default_value_t = 1.0)]
    half_width: f64,
}

impl DistArgs {
    fn family(&self) -> DistributionFamily {
        match self.dist {
            DistArg::Normal => DistributionFamily::StandardNormal,
            DistArg::Rademacher => DistributionFamily::RademacherProduct,
            DistArg::Sphere => DistributionFamily::UniformSphere {
                radius: self.radius,
            },
            DistArg::Bounded => DistributionFamily::BoundedUniform {
                half_width: self.half_width,
            },
            DistArg::Mixture => DistributionFamily::ZeroOrSphereMixture,
        }
    }
}

#[derive(Debug, Args)]
struct SampleArgs {
    #[command(flatten)]
    dist: DistArgs,
    /// Dimension
    #[arg(long, default_value_t = 10)]
    d: usize,
    /// Number of points
    #[arg(long, default_value_t = 100)]
    n: usize,
    /// Seed for all randomness
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Read points from this CSV instead of sampling
    #[arg(long)]
    input: Option<PathBuf>,
}

impl SampleArgs {
    fn samples(&self) -> Result<SampleSet> {
        match &self.input {
            Some(path) => SampleSet::from_matrix(read_matrix_csv(path)?),
            None => sample(
                &DistributionSpec::new(self.dist.family(), self.d)?,
                self.n,
                self.seed,
            ),
        }
    }
}

#[derive(Debug, Args)]
struct KernelArgs {
    /// Kernel family
    #[arg(long, value_enum, default_value = "gaussian")]
    kernel: KernelArg,
    /// Kernel scale (default: 1 for poly, (2+delta)ln(n)/d otherwise)
    #[arg(long)]
    a: Option<f64>,
    /// Polynomial offset
    #[arg(long, default_value_t = 1.0)]
    b: f64,
    /// Polynomial degree
    #[arg(long, default_value_t = 2)]
    p: u32,
}

impl KernelArgs {
    fn spec(&self, n: usize, d: usize, delta: f64) -> Result<KernelSpec> {
        let default_a = || {
            if n < 2 {
                Err(invalid("the default bandwidth needs n >= 2; pass --a"))
            } else {
                Ok((2.0 + delta) * (n as f64).ln() / d as f64)
            }
        };
        match self.kernel {
            KernelArg::Poly => KernelSpec::polynomial(self.a.unwrap_or(1.0), self.b, self.p),
            KernelArg::Gaussian => KernelSpec::gaussian(self.a.map_or_else(default_a, Ok)?),
            KernelArg::Laplacian => KernelSpec::laplacian(self.a.map_or_else(default_a, Ok)?),
        }
    }

    fn rule(&self, delta: f64) -> Result<KernelRule> {
        match (self.kernel, self.a) {
            (KernelArg::Gaussian, None) => Ok(KernelRule::GaussianLogScaled { coef: 2.0 + delta }),
            (KernelArg::Laplacian, None) => {
                Err(invalid("sweeps with the laplacian kernel need --a"))
            }
            _ => Ok(KernelRule::Fixed {
                kernel: self.spec(2, 1, delta)?,
            }),
        }
    }
}

#[derive(Debug, Args)]
struct BoundArgs {
    /// Constant of the polynomial bound
    #[arg(long = "C0", default_value_t = 1.0)]
    c0: f64,
    /// Constant of the refined polynomial bound
    #[arg(long = "C0-refined", default_value_t = 1.0)]
    c0_refined: f64,
    /// Gaussian lower-regime constant
    #[arg(long, default_value_t = 0.5)]
    c0_lower: f64,
    /// Small-bandwidth threshold a < c1/d
    #[arg(long, default_value_t = 0.01)]
    c1: f64,
    /// Slack in a >= (2+delta)ln(n)/d
    #[arg(long, default_value_t = 1.0)]
    delta: f64,
    /// Safety factor c in the noise threshold c/(bound + lambda)
    #[arg(long, default_value_t = 0.1)]
    noise_safety: f64,
}

impl BoundArgs {
    fn config(&self) -> Result<BoundConfig> {
        let cfg = BoundConfig {
            c0: self.c0,
            c0_refined: self.c0_refined,
            c0_lower: self.c0_lower,
            c1_threshold: self.c1,
            delta: self.delta,
            noise_safety: self.noise_safety,
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Debug, Args)]
struct SpectralArgs {
    /// Relative tolerance of the eigensolver
    #[arg(long, default_value_t = DEFAULT_TOLERANCE)]
    tol: f64,
    /// Iteration cap of the eigensolver (default: 10n)
    #[arg(long)]
    max_iter: Option<usize>,
}

impl SpectralArgs {
    fn options(&self) -> SpectralOptions {
        SpectralOptions {
            tolerance: self.tol,
            max_iterations: self.max_iter,
            ..SpectralOptions::default()
        }
    }
}

#[derive(Debug, Args)]
struct SweepArgs {
    /// Dimension
    #[arg(long, default_value_t = 100)]
    d: usize,
    /// Runs per grid point
    #[arg(long, default_value_t = experiments::DEFAULT_RUNS)]
    runs: usize,
    /// Base seed of the sweep
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Skip grid points whose working set exceeds this many bytes
    #[arg(long, default_value_t = DEFAULT_MEMORY_CEILING)]
    memory_ceiling: u64,
    /// Leave the wall_time_s column empty
    #[arg(long)]
    no_timing: bool,
    #[command(flatten)]
    spectral: SpectralArgs,
    #[command(flatten)]
    bounds: BoundArgs,
}

impl SweepArgs {
    fn plan(
        &self,
        ns: &[usize],
        kernel: KernelRule,
        family: DistributionFamily,
    ) -> Result<ExperimentPlan> {
        let mut plan = ExperimentPlan::new(ns, self.d, self.runs, kernel, family)
            .with_seed(self.seed)
            .with_bounds(self.bounds.config()?);
        plan.memory_ceiling_bytes = self.memory_ceiling;
        plan.spectral = self.spectral.options();
        plan.validate()?;
        Ok(plan)
    }
}

#[derive(Debug, Args)]
struct SampleCmd {
    #[command(flatten)]
    dist: DistArgs,
    /// Dimension
    #[arg(long, default_value_t = 10)]
    d: usize,
    /// Number of points
    #[arg(long, default_value_t = 100)]
    n: usize,
    /// Seed for all randomness
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Add a header row x1,...,xd
    #[arg(long)]
    header: bool,
}

#[derive(Debug, Args)]
struct KernelMatrixCmd {
    #[command(flatten)]
    samples: SampleArgs,
    #[command(flatten)]
    kernel: KernelArgs,
    /// Slack in the default bandwidth (2+delta)ln(n)/d
    #[arg(long, default_value_t = 1.0)]
    delta: f64,
}

#[derive(Debug, Args)]
struct SpectralNormCmd {
    #[command(flatten)]
    samples: SampleArgs,
    #[command(flatten)]
    kernel: KernelArgs,
    #[command(flatten)]
    spectral: SpectralArgs,
    /// Slack in the default bandwidth (2+delta)ln(n)/d
    #[arg(long, default_value_t = 1.0)]
    delta: f64,
}

#[derive(Debug, Args)]
struct Figure1Cmd {
    /// Grid of sample sizes
    #[arg(
        long = "n",
        value_delimiter = ',',
        default_value = "10,32,100,316,1000,2000"
    )]
    ns: Vec<usize>,
    /// Also run n = 10000 (about 800 MB for K)
    #[arg(long)]
    full: bool,
    #[command(flatten)]
    dist: DistArgs,
    /// Polynomial scale
    #[arg(long, default_value_t = 1.0)]
    a: f64,
    /// Polynomial offset
    #[arg(long, default_value_t = 1.0)]
    b: f64,
    /// Polynomial degree
    #[arg(long, default_value_t = 4)]
    p: u32,
    #[command(flatten)]
    sweep: SweepArgs,
}

#[derive(Debug, Args)]
struct Figure2Cmd {
    /// Grid of sample sizes
    #[arg(
        long = "n",
        value_delimiter = ',',
        default_value = "10,32,100,316,1000,2000"
    )]
    ns: Vec<usize>,
    /// Also run n = 10000 (about 800 MB for K)
    #[arg(long)]
    full: bool,
    #[command(flatten)]
    dist: DistArgs,
    #[command(flatten)]
    sweep: SweepArgs,
}

#[derive(Debug, Args)]
struct LowerRegimeCmd {
    /// Grid of sample sizes
    #[arg(long = "n", value_delimiter = ',', default_value = "200,500,800")]
    ns: Vec<usize>,
    /// Bandwidth coefficient: a = coef/d
    #[arg(long, default_value_t = 0.1)]
    coef: f64,
    #[command(flatten)]
    dist: DistArgs,
    #[command(flatten)]
    sweep: SweepArgs,
}

#[derive(Debug, Args)]
struct MixtureCmd {
    /// Grid of sample sizes
    #[arg(long = "n", value_delimiter = ',', default_value = "400")]
    ns: Vec<usize>,
    /// Bandwidth coefficient: a = coef*ln(n)/d
    #[arg(long, default_value_t = 10.0)]
    coef: f64,
    #[command(flatten)]
    sweep: SweepArgs,
}

#[derive(Debug, Args)]
struct CalibrateCmd {
    #[command(flatten)]
    dist: DistArgs,
    /// Dimension
    #[arg(long, default_value_t = 100)]
    d: usize,
    /// Polynomial degrees to sweep
    #[arg(long = "p", value_delimiter = ',', default_value = "4")]
    ps: Vec<u32>,
    /// Sample sizes to sweep
    #[arg(long = "n", value_delimiter = ',', default_value = "10,100,1000")]
    ns: Vec<usize>,
    /// Polynomial scale
    #[arg(long, default_value_t = 1.0)]
    a: f64,
    /// Polynomial offset
    #[arg(long, default_value_t = 1.0)]
    b: f64,
    /// Runs per (n, p)
    #[arg(long, default_value_t = experiments::DEFAULT_RUNS)]
    runs: usize,
    /// Base seed
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Skip sizes whose working set exceeds this many bytes
    #[arg(long, default_value_t = DEFAULT_MEMORY_CEILING)]
    memory_ceiling: u64,
    #[command(flatten)]
    spectral: SpectralArgs,
}

#[derive(Debug, Args)]
struct KrrCmd {
    #[command(flatten)]
    samples: SampleArgs,
    #[command(flatten)]
    kernel: KernelArgs,
    /// Regularization parameter
    #[arg(long)]
    lambda: Option<f64>,
    /// Labels: CSV whose first column is y (default: uniform 0/1 from the seed)
    #[arg(long)]
    labels: Option<PathBuf>,
    /// Slack in the default bandwidth (2+delta)ln(n)/d
    #[arg(long, default_value_t = 1.0)]
    delta: f64,
}

#[derive(Debug, Args)]
struct AttackCmd {
    #[command(flatten)]
    dist: DistArgs,
    /// Dimension
    #[arg(long, default_value_t = 10)]
    d: usize,
    /// Number of points
    #[arg(long, default_value_t = 100)]
    n: usize,
    /// Base seed; trial t uses a seed derived from it
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[command(flatten)]
    kernel: KernelArgs,
    /// Regularization parameter
    #[arg(long, default_value_t = 1.0)]
    lambda: f64,
    /// Noise family added to the released coefficients
    #[arg(long, value_enum, default_value = "uniform")]
    noise: NoiseArg,
    /// Half-width of uniform noise
    #[arg(long, default_value_t = 0.0)]
    beta: f64,
    /// Standard deviation of Gaussian noise
    #[arg(long, default_value_t = 0.0)]
    sigma: f64,
    /// Scale of Laplace noise
    #[arg(long, default_value_t = 0.0)]
    scale: f64,
    /// Number of independent trials
    #[arg(long, default_value_t = 1)]
    trials: usize,
    /// Slack in the default bandwidth (2+delta)ln(n)/d
    #[arg(long, default_value_t = 1.0)]
    delta: f64,
    #[command(flatten)]
    spectral: SpectralArgs,
}

#[derive(Debug, Args)]
struct PrivacySweepCmd {
    /// Grid of sample sizes
    #[arg(long = "n", value_delimiter = ',', default_value = "100,316,1000")]
    ns: Vec<usize>,
    #[command(flatten)]
    dist: DistArgs,
    #[command(flatten)]
    kernel: KernelArgs,
    /// Regularization parameter
    #[arg(long, default_value_t = 1.0)]
    lambda: f64,
    /// Absolute noise levels
    #[arg(
        long = "beta",
        value_delimiter = ',',
        default_value = "0,0.001,0.01,0.1"
    )]
    betas: Vec<f64>,
    /// Noise levels relative to the measured norm: beta = c/(norm + lambda)
    #[arg(long = "beta-rel", value_delimiter = ',', default_value = "0.1,1,10")]
    betas_rel: Vec<f64>,
    #[command(flatten)]
    sweep: SweepArgs,
}

/// Flag values as resolved after merging argv with the config file.
#[derive(Debug, Serialize)]
pub struct RunConfig {
    pub subcommand: String,
    pub values: BTreeMap<String, Vec<String>>,
    pub config_file: Option<PathBuf>,
    pub output: Option<PathBuf>,
    pub verbosity: u8,
}

/// Parses argv, runs the subcommand and returns the process exit code:
/// 0 on success, 2 on invalid arguments, 1 on runtime failure.
pub fn main<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let args: Vec<OsString> = args.into_iter().map(Into::into).collect();
    let (cli, run_config) = match parse(args) {
        Ok(v) => v,
        Err(ParseError::Clap(e)) => {
            let _ = e.print();
            return e.exit_code();
        }
        Err(ParseError::Config(e)) => return report(&e),
    };
    init_logging(cli.verbose);
    if cli.threads == Some(0) {
        return report(&invalid("--threads must be >= 1"));
    }
    let pool = match rayon::ThreadPoolBuilder::new()
        .num_threads(cli.threads.unwrap_or(0))
        .build()
    {
        Ok(p) => p,
        Err(e) => return report(&Error::InvalidArgument(format!("thread pool: {e}"))),
    };
    match pool.install(|| run(&cli, &run_config)) {
        Ok(()) => 0,
        Err(e) => report(&e),
    }
}

fn report(e: &Error) -> i32 {
    eprintln!("error: {e}");
    match e {
        Error::InvalidArgument(_) => 2,
        _ => 1,
    }
}

fn init_logging(verbose: u8) {
    let level = match verbose {
        0 => log::LevelFilter::Warn,
        1 => log::LevelFilter::Info,
        2 => log::LevelFilter::Debug,
        _ => log::LevelFilter::Trace,
    };
    let _ = env_logger::Builder::new()
        .filter_level(level)
        .parse_default_env()
        .try_init();
}

enum ParseError {
    Clap(clap::Error),
    Config(Error),
}

impl From<clap::Error> for ParseError {
    fn from(e: clap::Error) -> Self {
        Self::Clap(e)
    }
}

impl From<Error> for ParseError {
    fn from(e: Error) -> Self {
        Self::Config(e)
    }
}

fn parse(mut args: Vec<OsString>) -> std::result::Result<(Cli, RunConfig), ParseError> {
    let cmd = Cli::command();
    let first = cmd.clone().try_get_matches_from(&args)?;
    let config_path = first.get_one::<PathBuf>("config").cloned();
    let matches = match &config_path {
        Some(path) => {
            let values = read_config(path)?;
            let (name, sub) = first.subcommand().expect("subcommand is required");
            let sub_cmd = cmd.find_subcommand(name).expect("known subcommand");
            let mut extra = Vec::new();
            inject(&cmd, &first, &values, &mut extra)?;
            inject(sub_cmd, sub, &values, &mut extra)?;
            args.extend(extra);
            cmd.clone().try_get_matches_from(&args)?
        }
        None => first,
    };
    let cli = Cli::from_arg_matches(&matches)?;
    let (name, sub) = matches.subcommand().expect("subcommand is required");
    let values = sub
        .ids()
        .filter_map(|id| {
            let raw = sub.get_raw(id.as_str())?;
            Some((
                id.to_string(),
                raw.map(|v| v.to_string_lossy().into_owned()).collect(),
            ))
        })
        .collect();
    let run_config = RunConfig {
        subcommand: name.to_string(),
        values,
        config_file: config_path,
        output: cli.output.clone(),
        verbosity: cli.verbose,
    };
    Ok((cli, run_config))
}

fn normalize_key(k: &str) -> String {
    k.replace('_', "-")
}

fn read_config(path: &Path) -> Result<BTreeMap<String, Value>> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| invalid(format!("cannot read config {}: {e}", path.display())))?;
    let value: Value = serde_json::from_str(&text)
        .map_err(|e| invalid(format!("config {} is not valid JSON: {e}", path.display())))?;
    let Value::Object(map) = value else {
        return Err(invalid("config file must hold a JSON object"));
    };
    let mut out = BTreeMap::new();
    for (k, v) in map {
        match v {
            Value::Object(inner) => {
                for (ik, iv) in inner {
                    out.entry(normalize_key(&ik)).or_insert(iv);
                }
            }
            v => {
                out.insert(normalize_key(&k), v);
            }
        }
    }
    Ok(out)
}

/// Appends `--flag value` for config entries whose flag was left at its default.
fn inject(
    cmd: &clap::Command,
    matches: &ArgMatches,
    values: &BTreeMap<String, Value>,
    extra: &mut Vec<OsString>,
) -> Result<()> {
    for arg in cmd.get_arguments() {
        let Some(long) = arg.get_long() else { continue };
        if matches!(long, "config" | "help" | "version") {
            continue;
        }
        let Some(value) = values.get(&normalize_key(long)) else {
            continue;
        };
        let id = arg.get_id().as_str();
        let explicit = matches!(
            matches.value_source(id),
            Some(ValueSource::CommandLine | ValueSource::EnvVariable)
        );
        if explicit {
            continue;
        }
        let flag = format!("--{long}");
        if !arg.get_action().takes_values() {
            match value {
                Value::Bool(true) => extra.push(flag.into()),
                Value::Bool(false) | Value::Null => {}
                other => {
                    return Err(invalid(format!(
                        "config key {long} must be a boolean, got {other}"
                    )))
                }
            }
            continue;
        }
        let text = match value {
            Value::Null => continue,
            Value::String(s) => s.clone(),
            Value::Array(items) => items.iter().map(scalar_text).collect::<Vec<_>>().join(","),
            other => scalar_text(other),
        };
        extra.push(flag.into());
        extra.push(text.into());
    }
    Ok(())
}

fn scalar_text(v: &Value) -> String {
    match v {
        Value::String(s) => s.clone(),
        other => other.to_string(),
    }
}

fn open_output(path: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p)?)),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn write_json<T: Serialize>(cli: &Cli, value: &T) -> Result<()> {
    let mut out = open_output(cli.output.as_deref())?;
    serde_json::to_writer_pretty(&mut out, value)?;
    writeln!(out)?;
    out.flush()?;
    Ok(())
}

fn sidecar_path(cli: &Cli) -> Option<PathBuf> {
    cli.sidecar.clone().or_else(|| {
        cli.output.as_ref().map(|p| {
            let mut s = p.clone().into_os_string();
            s.push(".meta.json");
            PathBuf::from(s)
        })
    })
}

fn write_sidecar<P: Serialize, S: Serialize>(
    cli: &Cli,
    run: &RunConfig,
    plan: &P,
    bounds: &BoundConfig,
    summary: &S,
) -> Result<()> {
    let Some(path) = sidecar_path(cli) else {
        return Ok(());
    };
    let plan = serde_json::json!({ "config": run, "experiment": plan });
    let mut out = BufWriter::new(File::create(&path)?);
    experiments::write_sidecar(&mut out, &plan, bounds, summary)?;
    writeln!(out)?;
    out.flush()?;
    Ok(())
}

/// Reads a numeric CSV. A first row that does not parse is taken as a header.
pub fn read_matrix_csv(path: &Path) -> Result<Matrix> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .from_path(path)?;
    let mut rows = Vec::new();
    for (i, rec) in reader.records().enumerate() {
        let rec = rec?;
        let parsed: std::result::Result<Vec<f64>, _> = rec.iter().map(str::parse::<f64>).collect();
        match parsed {
            Ok(row) => rows.push(row),
            Err(_) if i == 0 => continue,
            Err(e) => {
                return Err(invalid(format!(
                    "{}: row {} is not numeric: {e}",
                    path.display(),
                    i + 1
                )));
            }
        }
    }
    if rows.is_empty() {
        return Err(invalid(format!("{} holds no numeric rows", path.display())));
    }
    Matrix::from_rows(&rows)
}

fn random_labels(n: usize, seed: u64) -> Vec<f64> {
    experiments::trial_labelings(n, seed).swap_remove(0)
}

fn run(cli: &Cli, run: &RunConfig) -> Result<()> {
    match &cli.command {
        Command::Sample(c) => {
            let x = sample(&DistributionSpec::new(c.dist.family(), c.d)?, c.n, c.seed)?;
            let header: Option<Vec<String>> = c
                .header
                .then(|| (1..=c.d).map(|j| format!("x{j}")).collect());
            x.data()
                .write_csv(open_output(cli.output.as_deref())?, header.as_deref())
        }
        Command::KernelMatrix(c) => {
            let x = c.samples.samples()?;
            let spec = c.kernel.spec(x.len(), x.dimension(), c.delta)?;
            let k = build_kernel_matrix(&x, &spec)?;
            k.entries()
                .write_csv(open_output(cli.output.as_deref())?, None)
        }
        Command::SpectralNorm(c) => {
            let x = c.samples.samples()?;
            let spec = c.kernel.spec(x.len(), x.dimension(), c.delta)?;
            let k = build_kernel_matrix(&x, &spec)?;
            let res = spectral_norm_with(k.entries(), &c.spectral.options())?;
            write_json(cli, &res)
        }
        Command::Figure1(c) => {
            let kernel = KernelRule::Fixed {
                kernel: KernelSpec::polynomial(c.a, c.b, c.p)?,
            };
            let plan = c
                .sweep
                .plan(&with_full(&c.ns, c.full), kernel, c.dist.family())?;
            sweep_output(cli, run, &c.sweep, &plan, experiments::run_figure1(&plan)?)
        }
        Command::Figure2(c) => {
            let kernel = KernelRule::GaussianLogScaled {
                coef: 2.0 + c.sweep.bounds.delta,
            };
            let plan = c
                .sweep
                .plan(&with_full(&c.ns, c.full), kernel, c.dist.family())?;
            sweep_output(cli, run, &c.sweep, &plan, experiments::run_figure2(&plan)?)
        }
        Command::LowerRegime(c) => {
            let kernel = KernelRule::GaussianPerDimension { coef: c.coef };
            let plan = c.sweep.plan(&c.ns, kernel, c.dist.family())?;
            sweep_output(
                cli,
                run,
                &c.sweep,
                &plan,
                experiments::run_lower_regime(&plan)?,
            )
        }
        Command::Mixture(c) => {
            let kernel = KernelRule::GaussianLogScaled { coef: c.coef };
            let plan = c
                .sweep
                .plan(&c.ns, kernel, DistributionFamily::ZeroOrSphereMixture)?;
            sweep_output(
                cli,
                run,
                &c.sweep,
                &plan,
                experiments::run_mixture_counterexample(&plan)?,
            )
        }
        Command::Calibrate(c) => {
            let plan = CalibrationPlan {
                family: c.dist.family(),
                d: c.d,
                a: c.a,
                b: c.b,
                p_range: c.ps.clone(),
                n_range: c.ns.clone(),
                runs: c.runs,
                base_seed: c.seed,
                memory_ceiling_bytes: c.memory_ceiling,
                spectral: c.spectral.options(),
            };
            let cal = experiments::calibrate_c0(&plan)?;
            let mut out = serde_json::to_value(cal.bounds)?;
            if let Value::Object(map) = &mut out {
                map.insert("required_C0".into(), cal.required_c0.into());
                map.insert("measurements".into(), cal.measurements.into());
            }
            write_json(cli, &out)
        }
        Command::Krr(c) => {
            let lambda = c
                .lambda
                .ok_or_else(|| invalid("krr needs --lambda <LAMBDA>"))?;
            let x = c.samples.samples()?;
            let y = match &c.labels {
                Some(path) => {
                    let m = read_matrix_csv(path)?;
                    (0..m.rows()).map(|i| m.get(i, 0)).collect()
                }
                None => random_labels(x.len(), derive_seed(c.samples.seed, &[1])),
            };
            let spec = c.kernel.spec(x.len(), x.dimension(), c.delta)?;
            let model = fit(&x, &y, &spec, lambda)?;
            write_json(cli, &model.export())
        }
        Command::Attack(c) => attack(cli, c),
        Command::PrivacySweep(c) => {
            let kernel = c.kernel.rule(c.sweep.bounds.delta)?;
            let plan = c.sweep.plan(&c.ns, kernel, c.dist.family())?;
            let betas: Vec<BetaSpec> = c
                .betas
                .iter()
                .map(|&b| BetaSpec::Absolute(b))
                .chain(c.betas_rel.iter().map(|&b| BetaSpec::RelativeToNorm(b)))
                .collect();
            let trials = experiments::run_privacy_sweep(&plan, c.lambda, &betas)?;
            let summary = experiments::summarize_privacy(&trials, &betas);
            let mut out = open_output(cli.output.as_deref())?;
            experiments::write_privacy_csv(&mut out, &summary)?;
            out.flush()?;
            let detail = serde_json::json!({ "summary": summary, "trials": trials });
            write_sidecar(cli, run, &plan, &plan.bounds, &detail)
        }
    }
}

fn with_full(ns: &[usize], full: bool) -> Vec<usize> {
    let mut ns = ns.to_vec();
    if full && !ns.contains(&10_000) {
        ns.push(10_000);
    }
    ns
}

fn sweep_output(
    cli: &Cli,
    run: &RunConfig,
    sweep: &SweepArgs,
    plan: &ExperimentPlan,
    records: Vec<ExperimentRecord>,
) -> Result<()> {
    let summary = experiments::summarize(&records);
    for s in &summary {
        log::info!(
            "n={} d={}: mean {:.6e}, max {:.6e}, bound {:.6e}",
            s.n,
            s.d,
            s.mean_norm,
            s.max_norm,
            s.predicted_bound
        );
    }
    let mut out = open_output(cli.output.as_deref())?;
    experiments::write_records_csv(&mut out, &records, !sweep.no_timing)?;
    out.flush()?;
    write_sidecar(cli, run, plan, &plan.bounds, &summary)
}

fn attack(cli: &Cli, c: &AttackCmd) -> Result<()> {
    if c.trials == 0 {
        return Err(invalid("--trials must be >= 1"));
    }
    let spec = c.kernel.spec(c.n, c.d, c.delta)?;
    let dist = DistributionSpec::new(c.dist.family(), c.d)?;
    let mut w = csv::Writer::from_writer(open_output(cli.output.as_deref())?);
    w.write_record([
        "seed",
        "beta",
        "hamming",
        "recovered_fraction",
        "lemma_bound",
        "spectral_norm",
    ])?;
    for t in 0..c.trials {
        let seed = derive_seed(c.seed, &[t as u64]);
        let x = sample(&dist, c.n, derive_seed(seed, &[0]))?;
        let y = random_labels(c.n, derive_seed(seed, &[1]));
        let family = match c.noise {
            NoiseArg::Uniform => NoiseFamily::UniformInf { beta: c.beta },
            NoiseArg::Gaussian => NoiseFamily::GaussianIid { sigma: c.sigma },
            NoiseArg::Laplace => NoiseFamily::LaplaceIid { scale: c.scale },
        };
        let noise = NoiseSpec {
            family,
            seed: derive_seed(seed, &[2]),
        };
        let trial = simulate(&x, &spec, c.lambda, &y, &noise, &c.spectral.options())?;
        w.write_record([
            seed.to_string(),
            trial.beta.to_string(),
            trial.outcome.hamming.to_string(),
            trial.outcome.recovered_fraction.to_string(),
            trial.outcome.lemma_bound.unwrap_or(f64::NAN).to_string(),
            trial.spectral_norm.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}
