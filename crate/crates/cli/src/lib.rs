//! Command-line front end for `mlknock`: CSV ingestion, two-level selection,
//! knockoff dumps, decomposition checks and simulation studies.
//!
//! Every command writes `report.json` (carrying `schema_version`) and
//! `summary.csv` into its output directory and prints a table to stdout.
//! Exit codes: 0 on success, 2 for invalid input, 3 for numerical failure.

mod commands;
pub mod ingest;
mod output;
mod simulate;

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use mlknock::multilevel::Selector;
use mlknock::penreg::LambdaRule;

pub use commands::{cmd_knockoffs, cmd_select, cmd_validate};
pub use ingest::{ingest_csv, IngestOptions, Ingested};
pub use simulate::cmd_simulate;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, thiserror::Error)]
pub enum Failure {
    #[error("{0}")]
    Input(String),
    #[error("{0}")]
    Numerical(String),
}

impl Failure {
    pub fn exit_code(&self) -> u8 {
        match self {
            Failure::Input(_) => 2,
            Failure::Numerical(_) => 3,
        }
    }
}

impl From<mlknock::Error> for Failure {
    fn from(e: mlknock::Error) -> Self {
        if e.is_validation() {
            Failure::Input(e.to_string())
        } else {
            Failure::Numerical(e.to_string())
        }
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "mlknock",
    version,
    about = "Knockoff variable selection for two-level clustered data"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Select level-1 and level-2 predictors from a CSV dataset
    Select(SelectArgs),
    /// Run the Monte Carlo study
    Simulate(SimulateArgs),
    /// Write one knockoff copy of each level's design
    Knockoffs(KnockoffArgs),
    /// Check the decomposition identities on a CSV dataset
    Validate(ValidateArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum MethodArg {
    Lasso,
    Derandomized,
    Sequential,
}

impl From<MethodArg> for Selector {
    fn from(m: MethodArg) -> Self {
        match m {
            MethodArg::Lasso => Selector::Lasso,
            MethodArg::Derandomized => Selector::Derandomized,
            MethodArg::Sequential => Selector::Sequential,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum RuleArg {
    Min,
    #[value(name = "one_se")]
    OneSe,
}

impl From<RuleArg> for LambdaRule {
    fn from(r: RuleArg) -> Self {
        match r {
            RuleArg::Min => LambdaRule::Min,
            RuleArg::OneSe => LambdaRule::OneSe,
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct DataArgs {
    /// CSV file with a header row
    #[arg(long)]
    pub input: PathBuf,

    /// Column holding the cluster id (integer or string)
    #[arg(long, default_value = "cluster")]
    pub cluster_col: String,

    /// Column holding the response
    #[arg(long, default_value = "y")]
    pub response_col: String,

    /// Comma-separated cluster-level predictors; detected from the data when omitted
    #[arg(long, value_delimiter = ',')]
    pub level2_cols: Option<Vec<String>>,
}

impl DataArgs {
    pub fn ingest_options(&self) -> IngestOptions {
        IngestOptions {
            cluster_col: self.cluster_col.clone(),
            response_col: self.response_col.clone(),
            level2_cols: self.level2_cols.clone(),
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct SelectArgs {
    #[command(flatten)]
    pub data: DataArgs,

    /// Directory for report.json and summary.csv
    #[arg(long)]
    pub output: PathBuf,

    #[arg(long, value_enum, default_value = "sequential")]
    pub method: MethodArg,

    /// Target FDR at each level
    #[arg(long, conflicts_with_all = ["pfer", "pfer_l1", "pfer_l2"])]
    pub fdr: Option<f64>,

    /// PFER budget at each level (default 1); with --overall, the overall budget
    #[arg(long)]
    pub pfer: Option<usize>,

    /// PFER budget for level 1
    #[arg(long)]
    pub pfer_l1: Option<usize>,

    /// PFER budget for level 2
    #[arg(long)]
    pub pfer_l2: Option<usize>,

    /// Knockoff draws aggregated per level
    #[arg(long, default_value_t = 31)]
    pub runs: usize,

    /// Minimum selection frequency across draws
    #[arg(long, default_value_t = 0.5)]
    pub eta: f64,

    /// Elastic-net mixing parameter (1 is the lasso)
    #[arg(long, default_value_t = 1.0)]
    pub alpha: f64,

    #[arg(long, value_enum, default_value = "one_se")]
    pub lambda_rule: RuleArg,

    /// One selection over all columns, ignoring the two levels
    #[arg(long)]
    pub overall: bool,

    #[arg(long, default_value_t = 1)]
    pub seed: u64,

    /// Spread knockoff draws over all cores
    #[arg(long)]
    pub parallel: bool,
}

#[derive(Debug, Clone, Args)]
pub struct SimulateArgs {
    /// Directory for report.json and summary.csv
    #[arg(long)]
    pub output: PathBuf,

    /// JSON file with simulation settings; flags below override it
    #[arg(long)]
    pub config: Option<PathBuf>,

    #[arg(long)]
    pub reps: Option<usize>,

    #[arg(long)]
    pub seed: Option<u64>,

    /// Slope of the time trend
    #[arg(long)]
    pub gamma: Option<f64>,

    /// Comma-separated subset of elastic_net, derandomized, sequential
    #[arg(long, value_delimiter = ',')]
    pub methods: Option<Vec<String>>,

    /// Comma-separated PFER budgets applied at each level
    #[arg(long, value_delimiter = ',', default_value = "1,2")]
    pub pfer: Vec<usize>,

    /// Comma-separated PFER budgets for the overall selection
    #[arg(long, value_delimiter = ',', default_value = "2")]
    pub overall_pfer: Vec<usize>,

    /// Skip the overall selection
    #[arg(long)]
    pub no_overall: bool,

    #[arg(long, default_value_t = 31)]
    pub runs: usize,

    #[arg(long, default_value_t = 0.5)]
    pub eta: f64,

    /// Run replications on all cores
    #[arg(long)]
    pub parallel: bool,
}

#[derive(Debug, Clone, Args)]
pub struct KnockoffArgs {
    #[command(flatten)]
    pub data: DataArgs,

    /// Directory for the knockoff CSVs, report.json and summary.csv
    #[arg(long)]
    pub output: PathBuf,

    /// derandomized draws Gaussian knockoffs, sequential draws sequential ones
    #[arg(long, value_enum, default_value = "sequential")]
    pub method: MethodArg,

    #[arg(long, default_value_t = 1)]
    pub seed: u64,
}

#[derive(Debug, Clone, Args)]
pub struct ValidateArgs {
    #[command(flatten)]
    pub data: DataArgs,

    /// Directory for report.json and summary.csv
    #[arg(long)]
    pub output: Option<PathBuf>,
}

pub fn run(cli: &Cli) -> Result<(), Failure> {
    match &cli.command {
        Command::Select(a) => cmd_select(a),
        Command::Simulate(a) => cmd_simulate(a),
        Command::Knockoffs(a) => cmd_knockoffs(a),
        Command::Validate(a) => cmd_validate(a),
    }
}
