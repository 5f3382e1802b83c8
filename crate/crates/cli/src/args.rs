use std::path::PathBuf;

use clap::{ArgGroup, Args, Parser, Subcommand, ValueEnum};
use patrol_core::evaluator::SofteningConfig;
use patrol_core::generators::{AttackTimeRule, BetaRule};
use patrol_core::{GradientRoute, Normalization, OptimizerConfig};

#[derive(Debug, Parser)]
#[command(
    name = "patrol",
    version,
    about = "Synthesize and check defender strategies for patrolling games"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write a graph of one of the instance families as JSON.
    Generate(GenerateArgs),
    /// Optimize strategies from random restarts and keep the best.
    Solve(SolveArgs),
    /// Evaluate a strategy and report its worst case.
    Eval(EvalArgs),
    /// Validate the evaluator on a strategy against brute force,
    /// finite differences and playouts.
    Check(CheckArgs),
    /// Run the optimizer for several memory sizes and write a CSV summary.
    Bench(BenchArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Family {
    Grid,
    Points,
    Office,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum AttackRuleArg {
    Standard,
    Extended,
}

impl From<AttackRuleArg> for AttackTimeRule {
    fn from(a: AttackRuleArg) -> Self {
        match a {
            AttackRuleArg::Standard => AttackTimeRule::Standard,
            AttackRuleArg::Extended => AttackTimeRule::Extended,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum BetaRuleArg {
    /// Detection probability 1 everywhere.
    Perfect,
    /// Uniform in [0.8, 1].
    Imperfect,
}

impl From<BetaRuleArg> for BetaRule {
    fn from(b: BetaRuleArg) -> Self {
        match b {
            BetaRuleArg::Perfect => BetaRule::Perfect,
            BetaRuleArg::Imperfect => BetaRule::IMPERFECT,
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct FamilyArgs {
    #[arg(long, value_enum)]
    pub family: Family,
    /// Grid side length (grid).
    #[arg(long)]
    pub n: Option<usize>,
    /// Number of targets (grid).
    #[arg(long)]
    pub k: Option<usize>,
    /// JSON file with `[[x, y], ...]` integer coordinates (points).
    #[arg(long, conflicts_with = "synthetic_layout")]
    pub points: Option<PathBuf>,
    /// Use the bundled synthetic 18-point layout (points).
    #[arg(long)]
    pub synthetic_layout: bool,
    /// Number of floors, 1 to 3 (office).
    #[arg(long)]
    pub floors: Option<usize>,
    /// Seed for point placement, costs and detection probabilities.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, value_enum, default_value = "standard")]
    pub attack_time_rule: AttackRuleArg,
    #[arg(long, value_enum, default_value = "perfect")]
    pub beta_rule: BetaRuleArg,
    #[arg(long, default_value_t = 180.0)]
    pub cost_min: f64,
    #[arg(long, default_value_t = 200.0)]
    pub cost_max: f64,
    /// Detection probability of every office (office).
    #[arg(long)]
    pub detection: Option<f64>,
    /// Attack time of every office (office).
    #[arg(long)]
    pub attack_time: Option<u32>,
    /// One floor with detection 1 and attack time 112 (office).
    #[arg(long)]
    pub tight_tour: bool,
}

#[derive(Debug, Clone, Args)]
pub struct GenerateArgs {
    #[command(flatten)]
    pub family: FamilyArgs,
    /// Output file; standard output when absent.
    #[arg(short, long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum NormalizationArg {
    Full,
    Pivot,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum RouteArg {
    Adjoint,
    Forward,
}

#[derive(Debug, Clone, Args)]
pub struct OptimizerArgs {
    #[arg(long)]
    pub delta: Option<f64>,
    #[arg(long)]
    pub threshold: Option<f64>,
    #[arg(long)]
    pub patience: Option<usize>,
    #[arg(long)]
    pub max_iters: Option<usize>,
    #[arg(long)]
    pub step_scale: Option<f64>,
    #[arg(long)]
    pub margin: Option<f64>,
    #[arg(long)]
    pub temperature: Option<f64>,
    #[arg(long)]
    pub epsilon_support: Option<f64>,
    #[arg(long, value_enum)]
    pub normalization: Option<NormalizationArg>,
    #[arg(long, value_enum)]
    pub route: Option<RouteArg>,
    /// Give candidates whose target is out of reach no ascent direction.
    #[arg(long)]
    pub no_drain: bool,
}

impl OptimizerArgs {
    pub fn config(&self) -> OptimizerConfig {
        let d = OptimizerConfig::default();
        let s = SofteningConfig::default();
        OptimizerConfig {
            delta: self.delta.unwrap_or(d.delta),
            threshold: self.threshold.unwrap_or(d.threshold),
            patience: self.patience.unwrap_or(d.patience),
            max_iters: self.max_iters.unwrap_or(d.max_iters),
            step_scale: self.step_scale.unwrap_or(d.step_scale),
            softening: SofteningConfig {
                margin: self.margin.unwrap_or(s.margin),
                temperature: self.temperature.unwrap_or(s.temperature),
                epsilon_support: self.epsilon_support.unwrap_or(s.epsilon_support),
                drain_hopeless: !self.no_drain,
            },
            normalization: match self.normalization {
                None => d.normalization,
                Some(NormalizationArg::Full) => Normalization::Full,
                Some(NormalizationArg::Pivot) => Normalization::Pivot,
            },
            route: match self.route {
                None => d.route,
                Some(RouteArg::Adjoint) => GradientRoute::Adjoint,
                Some(RouteArg::Forward) => GradientRoute::Forward,
            },
        }
    }
}

#[derive(Debug, Clone, Args)]
#[command(group(ArgGroup::new("memory").required(true).args(["mem", "mem_file"])))]
pub struct SolveArgs {
    pub graph: PathBuf,
    /// Memory elements at every vertex.
    #[arg(long)]
    pub mem: Option<u32>,
    /// JSON object mapping vertex ids to memory sizes.
    #[arg(long)]
    pub mem_file: Option<PathBuf>,
    #[arg(long, default_value_t = 1)]
    pub restarts: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[command(flatten)]
    pub optimizer: OptimizerArgs,
    /// Directory receiving result.json, strategy.json and manifest.json.
    #[arg(long, default_value = ".")]
    pub out_dir: PathBuf,
    /// Add wall-clock time to result.json (it is always in the manifest).
    #[arg(long)]
    pub timing: bool,
}

#[derive(Debug, Clone, Args)]
pub struct EvalArgs {
    pub graph: PathBuf,
    pub strategy: PathBuf,
    #[arg(long, default_value_t = 1e-6)]
    pub epsilon_support: f64,
    #[arg(short, long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct CheckArgs {
    pub graph: PathBuf,
    pub strategy: PathBuf,
    #[arg(long, default_value_t = 1e-6)]
    pub fd_step: f64,
    /// Playouts per sampled entry.
    #[arg(long, default_value_t = 20_000)]
    pub mc_samples: usize,
    /// Number of `(edge, target)` entries checked by playouts.
    #[arg(long, default_value_t = 20)]
    pub mc_entries: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Largest number of paths explored per entry by the brute force.
    #[arg(long, default_value_t = patrol_core::oracle::PATH_LIMIT)]
    pub path_limit: usize,
    #[arg(long, default_value_t = 1e-9)]
    pub value_tol: f64,
    #[arg(long, default_value_t = 1e-5)]
    pub grad_tol: f64,
    #[arg(short, long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct BenchArgs {
    #[command(flatten)]
    pub family: FamilyArgs,
    /// Memory sizes to run, comma separated.
    #[arg(long, value_delimiter = ',', default_values_t = [1u32, 2, 3, 4])]
    pub mem: Vec<u32>,
    #[arg(long, default_value_t = 200)]
    pub restarts: usize,
    /// Root seed of the restarts.
    #[arg(long, default_value_t = 1)]
    pub driver_seed: u64,
    #[command(flatten)]
    pub optimizer: OptimizerArgs,
    /// CSV output; standard output when absent.
    #[arg(short, long)]
    pub output: Option<PathBuf>,
}
