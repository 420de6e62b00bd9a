//! Command-line driver: instance generation, Low-RAMP runs, state evolution,
//! phase-diagram scans, spectral estimates and algorithm-versus-theory
//! comparisons.
//!
//! Exit codes: `0` success, `2` invalid configuration or input, `3`
//! numerical failure.

mod commands;
pub mod config;
pub mod table;

use std::ffi::OsString;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::channels::{ChannelFamily, ChannelSpec, Disorder};
use crate::priors::PriorSpec;
use crate::{Error, Result};
pub use table::{Cell, Format, Table};

pub const EXIT_CONFIG: u8 = 2;
pub const EXIT_NUMERICAL: u8 = 3;

#[derive(Debug, Parser)]
#[command(name = "lowramp", version, about = "Low-rank matrix estimation: Low-RAMP and state evolution")]
pub struct Cli {
    /// `key = value` file with default flags; flags on the command line win.
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,

    /// Worker threads (defaults to `LOWRAMP_THREADS`, then all cores).
    #[arg(long, global = true, env = "LOWRAMP_THREADS")]
    pub threads: Option<usize>,

    #[arg(long, global = true, value_enum, default_value_t = Format::Csv)]
    pub format: Format,

    /// Table destination; standard output when omitted.
    #[arg(long, global = true, value_name = "FILE")]
    pub output: Option<PathBuf>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a planted or quenched instance.
    Gen(GenArgs),
    /// Run Low-RAMP on a stored instance.
    Amp(AmpArgs),
    /// Iterate state evolution, or print the parametric fixed-point curve.
    Se(SeArgs),
    /// Thresholds over a grid of densities.
    PhaseScan(PhaseScanArgs),
    /// Leading eigenvectors of the score matrix or of the data.
    Spectral(SpectralArgs),
    /// Low-RAMP against state evolution over a grid of noise levels.
    Compare(CompareArgs),
}

#[derive(Debug, Clone, Args)]
pub struct PriorArgs {
    /// Prior tag: bernoulli, rademacher_bernoulli, gauss_bernoulli_joint,
    /// gauss_bernoulli_indep, gaussian, community, two_balanced, ising, spherical.
    #[arg(long)]
    pub prior: Option<String>,
    #[arg(long)]
    pub rho: Option<f64>,
    #[arg(long)]
    pub rank: Option<usize>,
    /// Variance of the `gaussian` prior.
    #[arg(long)]
    pub variance: Option<f64>,
    /// Mean of every coordinate of the `gaussian` prior.
    #[arg(long)]
    pub mean: Option<f64>,
}

#[derive(Debug, Clone, Args)]
pub struct PriorVArgs {
    /// Prior of the second factor; its presence makes the instance bipartite.
    #[arg(long)]
    pub prior_v: Option<String>,
    #[arg(long)]
    pub rho_v: Option<f64>,
    #[arg(long)]
    pub variance_v: Option<f64>,
    #[arg(long)]
    pub mean_v: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ChannelTag {
    Gaussian,
    Conventional,
    Sbm,
    Exponential,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum DisorderTag {
    Gaussian,
    Pm1,
}

#[derive(Debug, Clone, Args)]
pub struct ChannelArgs {
    #[arg(long, value_enum)]
    pub channel: Option<ChannelTag>,
    #[arg(long)]
    pub delta: Option<f64>,
    #[arg(long)]
    pub p_out: Option<f64>,
    #[arg(long)]
    pub mu: Option<f64>,
    /// Likelihood assumed by the algorithm, when it differs from the data's.
    #[arg(long, value_enum)]
    pub assumed: Option<ChannelTag>,
    #[arg(long)]
    pub assumed_delta: Option<f64>,
    #[arg(long)]
    pub assumed_p_out: Option<f64>,
    #[arg(long)]
    pub assumed_mu: Option<f64>,
    /// Inverse temperature of the `conventional` likelihood.
    #[arg(long)]
    pub beta: Option<f64>,
}

#[derive(Debug, Clone, Args)]
pub struct GenArgs {
    #[command(flatten)]
    pub prior: PriorArgs,
    #[command(flatten)]
    pub prior_v: PriorVArgs,
    #[command(flatten)]
    pub channel: ChannelArgs,
    /// Quenched disorder instead of a planted signal.
    #[arg(long, value_enum)]
    pub disorder: Option<DisorderTag>,
    /// Standard deviation of Gaussian disorder.
    #[arg(long, default_value_t = 1.0)]
    pub j: f64,
    #[arg(long)]
    pub n: usize,
    /// Number of columns; makes the instance bipartite.
    #[arg(long)]
    pub m: Option<usize>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Instance directory.
    #[arg(long)]
    pub out: PathBuf,
    /// Storage of `Y` and the planted factors.
    #[arg(long, value_enum, default_value_t = Storage::Binary)]
    pub storage: Storage,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Storage {
    Binary,
    Csv,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum InitTag {
    Random,
    Planted,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum VariantTag {
    Full,
    SelfAveraged,
    Bayes,
}

#[derive(Debug, Clone, Args)]
pub struct AmpFlags {
    #[arg(long, default_value_t = 1.0)]
    pub damping: f64,
    #[arg(long, default_value_t = 1e-8)]
    pub tol: f64,
    #[arg(long, default_value_t = 1000)]
    pub max_iters: usize,
    #[arg(long, value_enum, default_value_t = InitTag::Random)]
    pub init: InitTag,
    #[arg(long, default_value_t = 1e-3)]
    pub init_scale: f64,
    /// Defaults to `full` below 500 variables and `self-averaged` above.
    #[arg(long, value_enum)]
    pub variant: Option<VariantTag>,
    #[arg(long)]
    pub adaptive_damping: bool,
    /// Skip the Bethe free energy in the trace.
    #[arg(long)]
    pub no_free_energy: bool,
}

#[derive(Debug, Clone, Args)]
pub struct AmpArgs {
    #[arg(long)]
    pub instance: PathBuf,
    /// Prior used by the algorithm; defaults to the planted one.
    #[command(flatten)]
    pub prior: PriorArgs,
    #[command(flatten)]
    pub prior_v: PriorVArgs,
    #[command(flatten)]
    pub amp: AmpFlags,
    /// Run the naive mean-field iteration instead (symmetric instances).
    #[arg(long)]
    pub mean_field: bool,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SeInit {
    Informative,
    Uninformative,
    Both,
}

#[derive(Debug, Clone, Args)]
pub struct GridArgs {
    /// Smallest `x = m / Delta` of the parametric grid.
    #[arg(long)]
    pub x_min: Option<f64>,
    #[arg(long)]
    pub x_max: Option<f64>,
    #[arg(long)]
    pub x_points: Option<usize>,
}

#[derive(Debug, Clone, Args)]
pub struct SeArgs {
    /// Scalar model: bernoulli, rademacher_bernoulli, gauss_bernoulli,
    /// two_balanced, gaussian, jointly_sparse, community, or sk.
    #[arg(long)]
    pub model: String,
    #[arg(long)]
    pub rho: Option<f64>,
    #[arg(long)]
    pub rank: Option<usize>,
    /// Noise levels (comma separated).
    #[arg(long, value_delimiter = ',')]
    pub delta: Vec<f64>,
    #[arg(long, value_enum, default_value_t = SeInit::Both)]
    pub init: SeInit,
    /// Emit the parametric curve `x, delta, m, stable, free_energy_gap`.
    #[arg(long)]
    pub curve: bool,
    #[command(flatten)]
    pub grid: GridArgs,
    /// Couplings of the Sherrington-Kirkpatrick model (comma separated).
    #[arg(long, value_delimiter = ',')]
    pub j: Vec<f64>,
    /// Starting overlap for the Sherrington-Kirkpatrick iteration.
    #[arg(long, default_value_t = 0.5)]
    pub q0: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Rescale {
    None,
    Rho2,
}

#[derive(Debug, Clone, Args)]
pub struct RangeArgs {
    #[arg(long)]
    pub min: Option<f64>,
    #[arg(long)]
    pub max: Option<f64>,
    #[arg(long)]
    pub points: Option<usize>,
    /// Space the range logarithmically.
    #[arg(long)]
    pub log: bool,
}

#[derive(Debug, Clone, Args)]
pub struct PhaseScanArgs {
    #[arg(long)]
    pub model: String,
    #[arg(long)]
    pub rank: Option<usize>,
    /// Densities (comma separated); alternatively `--min/--max/--points`.
    #[arg(long, value_delimiter = ',')]
    pub rho: Vec<f64>,
    #[command(flatten)]
    pub range: RangeArgs,
    #[arg(long, value_enum, default_value_t = Rescale::None)]
    pub rescale: Rescale,
    #[command(flatten)]
    pub grid: GridArgs,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SourceTag {
    Score,
    Data,
}

#[derive(Debug, Clone, Args)]
pub struct SpectralArgs {
    #[arg(long)]
    pub instance: PathBuf,
    /// Number of leading components (defaults to the planted rank).
    #[arg(long)]
    pub k: Option<usize>,
    #[arg(long, value_enum, default_value_t = SourceTag::Score)]
    pub source: SourceTag,
    #[arg(long, default_value_t = 1e-10)]
    pub lanczos_tol: f64,
    #[arg(long, default_value_t = 400)]
    pub max_dim: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Clone, Args)]
pub struct CompareArgs {
    #[command(flatten)]
    pub prior: PriorArgs,
    #[arg(long)]
    pub n: usize,
    /// Noise levels (comma separated); alternatively `--min/--max/--points`.
    #[arg(long, value_delimiter = ',')]
    pub delta: Vec<f64>,
    #[command(flatten)]
    pub range: RangeArgs,
    #[command(flatten)]
    pub amp: AmpFlags,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

/// Parses `args` (including the program name), runs the command and maps
/// the outcome to an exit code.
pub fn run<I, T>(args: I) -> ExitCode
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let args: Vec<OsString> = args.into_iter().map(Into::into).collect();
    let args = match config::config_path(&args) {
        Some(path) => match config::read_config(path.as_ref()).and_then(|f| config::merge_args(args, &f)) {
            Ok(a) => a,
            Err(e) => return report(e),
        },
        None => args,
    };
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_CONFIG } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match execute(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => report(e),
    }
}

fn report(e: Error) -> ExitCode {
    eprintln!("error: {e}");
    ExitCode::from(exit_code(&e))
}

/// Exit code of a failed command.
pub fn exit_code(e: &Error) -> u8 {
    if e.is_numerical() {
        EXIT_NUMERICAL
    } else {
        EXIT_CONFIG
    }
}

/// Runs a parsed command line.
pub fn execute(cli: &Cli) -> Result<()> {
    if let Some(t) = cli.threads {
        if t == 0 {
            return Err(Error::Config("--threads must be at least 1".into()));
        }
        // Fails only if a pool already exists, in which case it is reused.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(t).build_global();
    }
    let out = cli.output.as_deref();
    match &cli.command {
        Command::Gen(a) => commands::cmd_gen(a),
        Command::Amp(a) => commands::cmd_amp(a)?.write(cli.format, out),
        Command::Se(a) => commands::cmd_se(a)?.write(cli.format, out),
        Command::PhaseScan(a) => commands::cmd_phase_scan(a)?.write(cli.format, out),
        Command::Spectral(a) => commands::cmd_spectral(a)?.write(cli.format, out),
        Command::Compare(a) => commands::cmd_compare(a)?.write(cli.format, out),
    }
}

fn need<T>(v: Option<T>, flag: &str, what: &str) -> Result<T> {
    v.ok_or_else(|| Error::Config(format!("{what} needs --{flag}")))
}

/// Builds a prior from its tag and parameters.
pub fn prior_from(
    tag: &str,
    rho: Option<f64>,
    rank: Option<usize>,
    variance: Option<f64>,
    mean: Option<f64>,
) -> Result<PriorSpec> {
    let what = format!("prior `{tag}`");
    let prior = match tag {
        "bernoulli" => PriorSpec::Bernoulli { rho: need(rho, "rho", &what)? },
        "rademacher_bernoulli" => PriorSpec::RademacherBernoulli { rho: need(rho, "rho", &what)? },
        "two_balanced" => PriorSpec::TwoBalanced { rho: need(rho, "rho", &what)? },
        "ising" => PriorSpec::Ising { rho: need(rho, "rho", &what)? },
        "gauss_bernoulli_joint" | "gauss_bernoulli" => {
            PriorSpec::GaussBernoulliJoint { rho: need(rho, "rho", &what)?, rank: rank.unwrap_or(1) }
        }
        "gauss_bernoulli_indep" => {
            PriorSpec::GaussBernoulliIndependent { rho: need(rho, "rho", &what)?, rank: rank.unwrap_or(1) }
        }
        "gaussian" => {
            let r = rank.unwrap_or(1);
            let v = variance.unwrap_or(1.0);
            let mut cov = vec![0.0; r * r];
            for i in 0..r {
                cov[i * r + i] = v;
            }
            PriorSpec::Gaussian { mean: vec![mean.unwrap_or(0.0); r], cov }
        }
        "community" => PriorSpec::Community { rank: need(rank, "rank", &what)? },
        "spherical" => PriorSpec::Spherical { rank: rank.unwrap_or(1) },
        other => return Err(Error::Config(format!("unknown prior `{other}`"))),
    };
    prior.validate()?;
    Ok(prior)
}

impl PriorArgs {
    pub fn build(&self) -> Result<Option<PriorSpec>> {
        self.prior
            .as_deref()
            .map(|tag| prior_from(tag, self.rho, self.rank, self.variance, self.mean))
            .transpose()
    }
}

impl PriorVArgs {
    pub fn build(&self, rank: Option<usize>) -> Result<Option<PriorSpec>> {
        self.prior_v
            .as_deref()
            .map(|tag| prior_from(tag, self.rho_v, rank, self.variance_v, self.mean_v))
            .transpose()
    }
}

fn family(
    tag: ChannelTag,
    delta: Option<f64>,
    p_out: Option<f64>,
    mu: Option<f64>,
    beta: Option<f64>,
    prefix: &str,
) -> Result<ChannelFamily> {
    let what = "the channel";
    let f = match tag {
        ChannelTag::Gaussian => ChannelFamily::Gaussian { delta: need(delta, &format!("{prefix}delta"), what)? },
        ChannelTag::Conventional => ChannelFamily::Conventional { beta: need(beta, "beta", what)? },
        ChannelTag::Sbm => ChannelFamily::Sbm {
            p_out: need(p_out, &format!("{prefix}p-out"), what)?,
            mu: need(mu, &format!("{prefix}mu"), what)?,
        },
        ChannelTag::Exponential => ChannelFamily::Exponential,
    };
    f.validate()?;
    Ok(f)
}

impl ChannelArgs {
    pub fn generating(&self) -> Result<ChannelFamily> {
        let tag = need(self.channel, "channel", "a planted instance")?;
        family(tag, self.delta, self.p_out, self.mu, self.beta, "")
    }

    pub fn assumed(&self) -> Result<Option<ChannelFamily>> {
        self.assumed
            .map(|tag| family(tag, self.assumed_delta, self.assumed_p_out, self.assumed_mu, self.beta, "assumed-"))
            .transpose()
    }

    pub fn spec(&self) -> Result<ChannelSpec> {
        let spec = ChannelSpec { generating: self.generating()?, assumed: self.assumed()? };
        spec.validate()?;
        Ok(spec)
    }
}

impl DisorderTag {
    pub fn build(self, j: f64) -> Disorder {
        match self {
            DisorderTag::Gaussian => Disorder::Gaussian { j },
            DisorderTag::Pm1 => Disorder::PlusMinusOne,
        }
    }
}

impl RangeArgs {
    /// Explicit list, or the range when the list is empty.
    pub fn values(&self, list: &[f64], name: &str) -> Result<Vec<f64>> {
        let values = if !list.is_empty() {
            list.to_vec()
        } else {
            match (self.min, self.max, self.points) {
                (Some(lo), Some(hi), Some(n)) if n >= 1 => {
                    if n > 1 && !(hi > lo) {
                        return Err(Error::Config(format!("empty {name} range [{lo}, {hi}]")));
                    }
                    if n == 1 {
                        vec![lo]
                    } else if self.log {
                        if !(lo > 0.0 && hi > 0.0) {
                            return Err(Error::Config("a logarithmic range needs positive ends".into()));
                        }
                        crate::quadrature::log_grid(lo, hi, n)
                    } else {
                        (0..n).map(|k| lo + (hi - lo) * k as f64 / (n - 1) as f64).collect()
                    }
                }
                (None, None, None) => Vec::new(),
                _ => return Err(Error::Config("a range needs --min, --max and --points".into())),
            }
        };
        if values.is_empty() {
            return Err(Error::Config(format!("the {name} grid is empty")));
        }
        if let Some(v) = values.iter().find(|v| !(**v > 0.0 && v.is_finite())) {
            return Err(Error::Config(format!("{name} values must be positive, got {v}")));
        }
        Ok(values)
    }
}
