use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(name = "swr", version, about = "Linear recurrence solvers, sliding-window truncations and precision studies")]
#[command(args_override_self = true)]
pub struct Cli {
    /// JSON file whose keys mirror the subcommand's flags; explicit flags win.
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Solve one recurrence and write the states as CSV.
    Solve(SolveArgs),
    /// Compare two solvers over many random seeds.
    Compare(CompareArgs),
    /// Tile materialization error sweep under emulated precision.
    Materialize(MaterializeArgs),
    /// Computational horizons: per-format underflow lags or (rho, eps) bandwidths.
    Horizon(HorizonArgs),
    /// Time solvers.
    Bench(BenchArgs),
    /// Run the gated recurrence layer forward and check its invariants.
    Layer(LayerArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Algo {
    Sequential,
    KoggeStone,
    BrentKung,
    /// Block decomposition with a dense carrier operator.
    Hierarchical,
    /// Block decomposition with a scanned carrier system.
    HierarchicalScan,
    /// Block Two-Pass (jagged window).
    B2p,
    /// Block Two-Pass carrying the exact boundary state.
    B2pFull,
    /// Threaded Block Two-Pass.
    B2pParallel,
    /// Uniform window of bandwidth --k.
    Uniform,
}

#[derive(Debug, Clone, Args)]
pub struct ProblemArgs {
    /// Sequence length for random problems.
    #[arg(long, default_value_t = 64)]
    pub n: usize,
    /// Channels per step for random problems.
    #[arg(long, default_value_t = 1)]
    pub d: usize,
    #[arg(long, env = "SWR_SEED", default_value_t = 0)]
    pub seed: u64,
    /// Lower end of the coefficient range.
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    pub a_lo: f64,
    /// Upper end of the coefficient range.
    #[arg(long, default_value_t = 1.0, allow_negative_numbers = true)]
    pub a_hi: f64,
    /// Use the constant coefficient a_i = rho instead of a random range.
    #[arg(long)]
    pub rho: Option<f64>,
}

#[derive(Debug, Clone, Args)]
pub struct SolverArgs {
    /// Block size for block algorithms.
    #[arg(long = "l", default_value_t = 16)]
    pub l: usize,
    /// Bandwidth for the uniform window.
    #[arg(long)]
    pub k: Option<usize>,
    /// Worker threads for b2p-parallel.
    #[arg(long, default_value_t = 4)]
    pub workers: usize,
    /// Blocks per synchronization segment for b2p-parallel (default: all blocks).
    #[arg(long)]
    pub segment_len: Option<usize>,
}

#[derive(Debug, Args)]
pub struct SolveArgs {
    #[arg(long, value_enum, default_value_t = Algo::Sequential)]
    pub algo: Algo,
    /// CSV with header `t,a,u_1,...,u_d`.
    #[arg(long, conflicts_with = "random")]
    pub input: Option<PathBuf>,
    /// Generate a random problem instead of reading one.
    #[arg(long)]
    pub random: bool,
    #[command(flatten)]
    pub problem: ProblemArgs,
    #[command(flatten)]
    pub solver: SolverArgs,
    /// Output CSV (default: stdout).
    #[arg(long, short)]
    pub output: Option<PathBuf>,
    /// Also write the problem as an input CSV.
    #[arg(long)]
    pub save_input: Option<PathBuf>,
    /// Significant digits in the output.
    #[arg(long, default_value_t = 17, value_parser = clap::value_parser!(u8).range(1..=17))]
    pub digits: u8,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ReportFormat {
    Csv,
    Json,
}

#[derive(Debug, Args)]
pub struct CompareArgs {
    #[arg(long, value_enum, default_value_t = Algo::B2p)]
    pub algo: Algo,
    #[arg(long, value_enum, default_value_t = Algo::Sequential)]
    pub against: Algo,
    /// Number of seeds, starting at --seed.
    #[arg(long, default_value_t = 10)]
    pub seeds: u64,
    #[command(flatten)]
    pub problem: ProblemArgs,
    #[command(flatten)]
    pub solver: SolverArgs,
    #[arg(long, value_enum, default_value_t = ReportFormat::Csv)]
    pub report: ReportFormat,
    #[arg(long, short)]
    pub output: Option<PathBuf>,
    /// Exit with status 1 if any row's max_rel_err exceeds this.
    #[arg(long)]
    pub assert_tol: Option<f64>,
}

#[derive(Debug, Args)]
pub struct MaterializeArgs {
    /// Strategy name or `all`.
    #[arg(long, default_value = "all")]
    pub strategy: String,
    #[arg(long, default_value = "bf16")]
    pub format: String,
    /// `lo:hi:points`, log-spaced.
    #[arg(long, default_value = "1e-4:1:32")]
    pub rho_sweep: String,
    #[arg(long = "l", default_value_t = 16)]
    pub l: usize,
    #[arg(long, short)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct HorizonArgs {
    /// Format name, or `all` for the full table.
    #[arg(long, conflicts_with = "grid")]
    pub format: Option<String>,
    #[arg(long, default_value_t = 0.5)]
    pub rho: f64,
    #[arg(long, default_value_t = 1e-4)]
    pub eps: f64,
    #[arg(long, default_value_t = 1.0)]
    pub nu: f64,
    /// Emit an (eps, rho) -> k grid as CSV.
    #[arg(long)]
    pub grid: bool,
    #[arg(long, default_value_t = 32)]
    pub grid_points: usize,
    #[arg(long, short)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    #[arg(long, value_enum, default_value_t = Algo::B2p)]
    pub algo: Algo,
    /// Comma-separated sequence lengths.
    #[arg(long, value_delimiter = ',', default_value = "4096")]
    pub n: Vec<usize>,
    #[arg(long, default_value_t = 16)]
    pub d: usize,
    #[command(flatten)]
    pub solver: SolverArgs,
    #[arg(long, env = "SWR_SEED", default_value_t = 0)]
    pub seed: u64,
    /// Timed runs per size (median reported).
    #[arg(long, default_value_t = 5, value_parser = clap::value_parser!(u32).range(1..))]
    pub runs: u32,
    /// Discarded runs before timing.
    #[arg(long, default_value_t = 1)]
    pub warmup: u32,
    #[arg(long)]
    pub csv: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum LayerWindow {
    Jagged,
    Uniform,
    Full,
}

#[derive(Debug, Args)]
pub struct LayerArgs {
    /// Model dimension.
    #[arg(long = "D", default_value_t = 64)]
    pub d_model: usize,
    /// Heads.
    #[arg(long = "h", default_value_t = 4)]
    pub heads: usize,
    #[arg(long, default_value_t = 128)]
    pub n: usize,
    #[arg(long = "l", default_value_t = 16)]
    pub l: usize,
    #[arg(long)]
    pub k: Option<usize>,
    #[arg(long, env = "SWR_SEED", default_value_t = 0)]
    pub seed: u64,
    #[arg(long, value_enum, default_value_t = LayerWindow::Jagged)]
    pub window: LayerWindow,
    #[arg(long)]
    pub q_groups: Option<usize>,
    #[arg(long)]
    pub k_groups: Option<usize>,
    /// Write the parameters as JSON.
    #[arg(long)]
    pub export_params: Option<PathBuf>,
    /// Write the layer output as CSV.
    #[arg(long, short)]
    pub output: Option<PathBuf>,
}
