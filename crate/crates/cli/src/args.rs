use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use kflat::{MeasureConvention, ProcessParams};

#[derive(Debug, Parser)]
#[command(
    name = "kflat",
    version,
    about = "Intrinsic volumes of Poisson k-flat processes in a ball: exact moments and Monte Carlo checks"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Exact functionals, moments, cumulants, asymptotics, Berry–Esseen bound and correlations.
    Exact(ExactArgs),
    /// Simulate replications and write one row of intrinsic volumes per replication.
    Simulate(SimulateArgs),
    /// Compare Monte Carlo moments, cumulants and correlations with the exact values.
    Validate(ValidateArgs),
    /// Kolmogorov distances to the normal law over a sweep of radii.
    Clt(CltArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ConventionArg {
    Invariant,
    SignedDistance,
}

impl From<ConventionArg> for MeasureConvention {
    fn from(c: ConventionArg) -> Self {
        match c {
            ConventionArg::Invariant => MeasureConvention::Invariant,
            ConventionArg::SignedDistance => MeasureConvention::SignedDistance,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Clone, Args)]
pub struct ProcessArgs {
    /// Ambient dimension d.
    #[arg(long, default_value_t = 2)]
    pub dim: usize,
    /// Flat dimension k (0 ≤ k < d).
    #[arg(long, default_value_t = 1)]
    pub k: usize,
    /// Intrinsic volume index j (0 ≤ j ≤ k).
    #[arg(long, default_value_t = 1)]
    pub j: usize,
    /// Intensity τ_k.
    #[arg(long, default_value_t = 1.0, allow_negative_numbers = true)]
    pub intensity: f64,
    /// Window radius ρ.
    #[arg(long, default_value_t = 1.0, allow_negative_numbers = true)]
    pub radius: f64,
    #[arg(long, value_enum, default_value_t = ConventionArg::Invariant)]
    pub convention: ConventionArg,
}

impl ProcessArgs {
    pub fn params(&self) -> kflat::Result<ProcessParams> {
        let p = ProcessParams::new(
            self.dim,
            self.k,
            self.intensity,
            self.radius,
            self.convention.into(),
        )?;
        p.check_j(self.j)?;
        Ok(p)
    }
}

#[derive(Debug, Clone, Args)]
pub struct OutputArgs {
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    pub format: Format,
    /// Output file; standard output when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct RunArgs {
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Worker threads (default: all cores). Never changes the numbers produced.
    #[arg(long, env = "KFLAT_WORKERS")]
    pub workers: Option<usize>,
    /// Refuse runs expecting more flats than this per replication.
    #[arg(long, default_value_t = 1e6)]
    pub max_flats: f64,
}

#[derive(Debug, Clone, Args)]
pub struct ExactArgs {
    #[command(flatten)]
    pub process: ProcessArgs,
    #[arg(long, default_value_t = 4)]
    pub max_order: usize,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Clone, Args)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub process: ProcessArgs,
    #[arg(long, default_value_t = 1000)]
    pub reps: u64,
    #[command(flatten)]
    pub run: RunArgs,
    #[command(flatten)]
    pub output: OutputArgs,
    /// Also write every realization (distances and frames) as JSON lines.
    #[arg(long)]
    pub export_realizations: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct ValidateArgs {
    #[command(flatten)]
    pub process: ProcessArgs,
    /// Highest moment order compared (at most 6).
    #[arg(long, visible_alias = "orders", default_value_t = 4)]
    pub max_order: usize,
    #[arg(long, default_value_t = 100_000)]
    pub reps: u64,
    /// Largest admissible |z| score.
    #[arg(long, default_value_t = 4.0)]
    pub threshold: f64,
    #[command(flatten)]
    pub run: RunArgs,
    #[command(flatten)]
    pub output: OutputArgs,
    /// Multiply the first exact value by this factor (harness self-check).
    #[arg(long, hide = true)]
    pub corrupt_exact: Option<f64>,
}

#[derive(Debug, Clone, Args)]
pub struct CltArgs {
    #[command(flatten)]
    pub process: ProcessArgs,
    /// Radii of the sweep, comma separated (at least 3 distinct values ≥ 1).
    #[arg(long, value_delimiter = ',', default_value = "1,2,4,8,16")]
    pub rhos: Vec<f64>,
    #[arg(long, default_value_t = 200_000)]
    pub reps: u64,
    #[arg(long, default_value_t = -0.65, allow_negative_numbers = true)]
    pub slope_min: f64,
    #[arg(long, default_value_t = -0.35, allow_negative_numbers = true)]
    pub slope_max: f64,
    /// Standardize with sample mean and deviation instead of the exact ones.
    #[arg(long)]
    pub sample_standardization: bool,
    #[command(flatten)]
    pub run: RunArgs,
    #[command(flatten)]
    pub output: OutputArgs,
}
