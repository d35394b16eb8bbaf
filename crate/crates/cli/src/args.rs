use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(name = "invopt", version, about = "Inventory policy optimization toolkit")]
pub struct Cli {
    /// Worker threads for Monte Carlo replications (results do not depend on it).
    #[arg(long, global = true)]
    pub jobs: Option<usize>,

    /// Seed for every random stream; overrides the config file.
    #[arg(long, global = true, env = "INVOPT_SEED")]
    pub seed: Option<u64>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Demand statistics and classical (SS, ROP, EOQ) policy per product.
    Summarize(SummarizeArgs),
    /// Seasonal-trend decomposition of one product's daily sales.
    Decompose(DecomposeArgs),
    /// Synthetic daily sales matching each product's demand summary.
    Fixture(FixtureArgs),
    /// Search the order quantity by grid scan or Bayesian optimization.
    Optimize(OptimizeArgs),
    /// Sensitivity sweeps, one-way ANOVA and what-if profit grids.
    Analyze(AnalyzeArgs),
}

#[derive(Debug, Args)]
pub struct SummarizeArgs {
    /// Daily sales CSV (`date,product_id,quantity`); inline demand otherwise.
    #[arg(long)]
    pub input: Option<PathBuf>,
    #[arg(long)]
    pub config: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct DecomposeArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub product: String,
    #[arg(long, default_value_t = 30)]
    pub period: usize,
    #[arg(long, default_value_t = 1)]
    pub robustness_iters: usize,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct FixtureArgs {
    #[arg(long)]
    pub config: PathBuf,
    #[arg(long, default_value_t = 365)]
    pub days: usize,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Method {
    Grid,
    Bayes,
}

#[derive(Debug, Args)]
pub struct OptimizeArgs {
    #[arg(long)]
    pub config: PathBuf,
    #[arg(long, value_enum, default_value_t = Method::Grid)]
    pub method: Method,
    /// Daily sales CSV to derive demand from instead of the inline summary.
    #[arg(long)]
    pub input: Option<PathBuf>,
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
    /// Dump inventory trajectories of the first N replications at each incumbent.
    #[arg(long, default_value_t = 0)]
    pub trajectories: u64,
    /// Replace the simulator by -(q - PEAK)^2/100 + 5e5 (harness testing).
    #[arg(long, hide = true)]
    pub stub_quadratic: Option<f64>,
}

#[derive(Debug, Args)]
pub struct AnalyzeArgs {
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub input: Option<PathBuf>,
    /// Parameter to vary, e.g. order_quantity or selling_price.
    #[arg(long)]
    pub sensitivity: Option<String>,
    #[arg(long, default_value = "-0.2,-0.1,0.1,0.2", allow_hyphen_values = true)]
    pub variations: String,
    /// Two result tables with identical columns, compared column by column.
    #[arg(long, num_args = 2, value_names = ["A", "B"])]
    pub anova: Option<Vec<PathBuf>>,
    /// Summary CSV with `product` and `mean_profit` columns.
    #[arg(long)]
    pub whatif: Option<PathBuf>,
    #[arg(long, default_value_t = 50_000.0)]
    pub half_range: f64,
    #[arg(long, default_value_t = 5)]
    pub steps: usize,
    #[arg(long)]
    pub out: PathBuf,
}
