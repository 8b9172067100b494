use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use mbdiag::hitting_set::{SamplingStrategy, SearchOrder};
use mbdiag::sequential::{Heuristic, PosteriorModel, SessionMode};

#[derive(Debug, Parser)]
#[command(name = "mbdiag", version, about = "Model-based diagnosis of propositional systems")]
pub struct Cli {
    /// Emit machine-readable JSON instead of text.
    #[arg(long, global = true)]
    pub json: bool,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Enumerate minimal diagnoses best first.
    Diagnose(DiagnoseArgs),
    /// Compute a minimal conflict with all components assumed normal.
    Conflicts(ConflictsArgs),
    /// Draw a sample of diagnoses.
    Sample(SampleArgs),
    /// Cheapest of N random minimal diagnoses.
    Bestof(BestOfArgs),
    /// Run a sequential diagnosis session.
    Session(SessionArgs),
    /// Serve the session HTTP API.
    Serve(ServeArgs),
    /// Time the search engines over problems and print CSV.
    Bench(BenchArgs),
    /// Exhaustive minimal diagnoses and conflicts for small instances.
    OracleBf(ProblemArg),
}

#[derive(Debug, Args)]
pub struct ProblemArg {
    /// `fulladder`, `random:SEED[:GATES]` or a .json / DSL file.
    #[arg(short = 'p', long = "problem", default_value = "fulladder")]
    pub problem: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Engine {
    Hstree,
    Rbfhs,
}

impl Engine {
    pub fn as_str(self) -> &'static str {
        match self {
            Engine::Hstree => "hstree",
            Engine::Rbfhs => "rbfhs",
        }
    }
}

#[derive(Debug, Args)]
pub struct DiagnoseArgs {
    #[command(flatten)]
    pub problem: ProblemArg,
    #[arg(long, value_enum, default_value = "hstree")]
    pub engine: Engine,
    /// `cardinality` or `probability`.
    #[arg(long, default_value = "cardinality")]
    pub order: SearchOrder,
    /// Stop after this many diagnoses.
    #[arg(short = 'k', long)]
    pub k: Option<usize>,
    #[arg(long)]
    pub max_checks: Option<u64>,
    #[arg(long)]
    pub max_nodes: Option<u64>,
}

#[derive(Debug, Args)]
pub struct ConflictsArgs {
    #[command(flatten)]
    pub problem: ProblemArg,
    /// Also list every minimal conflict by exhaustive enumeration.
    #[arg(long)]
    pub oracle: bool,
}

#[derive(Debug, Args)]
pub struct SampleArgs {
    #[command(flatten)]
    pub problem: ProblemArg,
    /// `best`, `worst` or `random`.
    #[arg(long, default_value = "best")]
    pub strategy: SamplingStrategy,
    #[arg(short = 'k', long, default_value_t = 5)]
    pub k: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Maximum random draws before giving up.
    #[arg(long)]
    pub retry_cap: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum CostArg {
    Cardinality,
    NegLogProb,
    Weights,
}

#[derive(Debug, Args)]
pub struct BestOfArgs {
    #[command(flatten)]
    pub problem: ProblemArg,
    #[arg(short = 'n', long, default_value_t = 20)]
    pub samples: usize,
    #[arg(long, value_enum, default_value = "cardinality")]
    pub cost: CostArg,
    /// Component weight `ID=W` for `--cost weights`; repeatable.
    #[arg(long = "weight")]
    pub weights: Vec<String>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 1)]
    pub threads: usize,
}

#[derive(Debug, Args)]
pub struct SessionArgs {
    #[command(flatten)]
    pub problem: ProblemArg,
    #[arg(long, default_value = "ent")]
    pub heuristic: Heuristic,
    #[arg(long, default_value = "dynamic")]
    pub mode: SessionMode,
    #[arg(short = 'k', long, default_value_t = 5)]
    pub k: usize,
    #[arg(long, default_value_t = 0.95)]
    pub sigma: f64,
    #[arg(long, default_value_t = 50)]
    pub max_queries: usize,
    #[arg(long, default_value = "best")]
    pub sampler: SamplingStrategy,
    #[arg(long, default_value = "prior")]
    pub posterior: PosteriorModel,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Answer queries automatically: `sim:GATE=FAULT,...`, or `sim` for the
    /// faults injected into a random problem. Without it, answers are read
    /// from standard input.
    #[arg(long)]
    pub oracle: Option<String>,
    /// Write the transcript as JSON lines to this file.
    #[arg(long)]
    pub transcript: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ServeArgs {
    #[arg(long, default_value = "127.0.0.1:8080")]
    pub addr: String,
    /// Extra problem files to offer; repeatable.
    #[arg(long = "problem")]
    pub problems: Vec<String>,
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    /// Problems to run; `corpus:SEED:COUNT` expands to COUNT random circuits.
    #[arg(short = 'p', long = "problem", required = true)]
    pub problems: Vec<String>,
    #[arg(long = "engine", value_enum, default_values = ["hstree", "rbfhs"])]
    pub engines: Vec<Engine>,
    #[arg(long = "order", default_values = ["cardinality", "probability"])]
    pub orders: Vec<SearchOrder>,
    #[arg(short = 'k', long)]
    pub k: Option<usize>,
    #[arg(long, default_value_t = 1)]
    pub reps: usize,
    /// Per-run consistency check budget; exhausted runs are reported as timeouts.
    #[arg(long)]
    pub max_checks: Option<u64>,
    /// Compare every complete run against exhaustive enumeration.
    #[arg(long)]
    pub verify: bool,
}
