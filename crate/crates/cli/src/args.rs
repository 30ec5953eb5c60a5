use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(name = "netlogit", version, about = "Pricing and simulation for logit markets with network effects")]
pub struct Cli {
    #[command(flatten)]
    pub common: Common,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct Common {
    /// Market document: {"g": [...], "beta": [...] | number, "r": number}.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,

    /// Write the result here instead of stdout.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,

    /// Significant digits in numeric output.
    #[arg(long, global = true, default_value_t = netlogit::format::DEFAULT_DIGITS)]
    pub digits: usize,

    /// Worker threads for sweeps (default: available parallelism).
    #[arg(long, global = true)]
    pub threads: Option<usize>,

    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,

    /// Solver tolerance.
    #[arg(long, global = true)]
    pub eps: Option<f64>,

    /// Iteration budget for the solvers (Nash sweeps or root-finder steps).
    #[arg(long, global = true)]
    pub max_iter: Option<usize>,

    /// Intrinsic utilities, comma separated (overrides the config).
    #[arg(long, global = true, value_delimiter = ',', allow_hyphen_values = true)]
    pub g: Option<Vec<f64>>,

    /// Price sensitivities: one value for all products or one per product.
    #[arg(long, global = true, value_delimiter = ',')]
    pub beta: Option<Vec<f64>>,

    /// Network strength in (0, 1).
    #[arg(long, global = true)]
    pub r: Option<f64>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Solve for prices.
    #[command(subcommand)]
    Price(PriceCommand),
    /// Simulate the consumer stream and write a checkpoint trace.
    Simulate(SimulateArgs),
    /// Solve across a grid of network strengths.
    Sweep(SweepArgs),
    /// Compare monopoly and competitive outcomes.
    Compare(CompareArgs),
    /// Regenerate the reference tables and figure data.
    Reproduce(ReproduceArgs),
}

#[derive(Debug, Subcommand)]
pub enum PriceCommand {
    /// Revenue-maximizing prices of a single owner of all products.
    Mono,
    /// Nash equilibrium prices of competing sellers.
    Nash {
        /// Use the closed-form route for equal intrinsic utilities.
        #[arg(long)]
        homogeneous: bool,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Sampling {
    Categorical,
    Gumbel,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[arg(long, default_value_t = 100_000)]
    pub consumers: u64,

    #[arg(long, default_value_t = 1000)]
    pub checkpoint_every: u64,

    /// Fixed seller prices (default: Nash equilibrium prices).
    #[arg(long, value_delimiter = ',')]
    pub prices: Option<Vec<f64>>,

    #[arg(long, value_enum, default_value_t = Sampling::Categorical)]
    pub mode: Sampling,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SweepMode {
    Mono,
    Nash,
    Both,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[arg(long, value_enum, default_value_t = SweepMode::Both)]
    pub mode: SweepMode,

    /// Grid as start:stop:step; stop is included when the grid lands on it.
    #[arg(long, default_value = "0.05:0.95:0.05")]
    pub r_grid: String,
}

#[derive(Debug, Args)]
pub struct CompareArgs {
    /// Number of consumers k after which utilities are evaluated.
    #[arg(long, default_value_t = 10_000_000)]
    pub horizon: u64,
}

#[derive(Debug, Args)]
pub struct ReproduceArgs {
    #[arg(long, default_value = "tables")]
    pub out_dir: PathBuf,
}
