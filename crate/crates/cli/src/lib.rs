//! Command-line driver: instance generation, strategy synthesis, evaluation,
//! validation against the oracles, and benchmark tables.

pub mod args;
mod check;
mod manifest;

use std::collections::HashMap;
use std::ffi::OsString;
use std::fmt::Write as _;
use std::fs;
use std::io::Write as _;
use std::path::Path;
use std::time::Instant;

use clap::error::ErrorKind;
use clap::Parser;
use patrol_core::generators::{GenError, SYNTHETIC_ATM_LAYOUT};
use patrol_core::optimizer::OptError;
use patrol_core::oracle::OracleError;
use patrol_core::report::{EvaluationReport, RunResultDoc};
use patrol_core::strategy::{parse_strategy, strategy_to_json};
use patrol_core::{
    gen_grid, gen_office_with, gen_points_complete, hard_value, parse_graph, protection_table, regstar, EvalError,
    GraphError, GridSpec, OfficeOverrides, PatrollingGraph, PointsSpec, StrategyError, StrategyIndex,
};

use args::{BenchArgs, Cli, Command, EvalArgs, Family, FamilyArgs, GenerateArgs, SolveArgs};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_INVALID: i32 = 2;
pub const EXIT_CHECK_FAILED: i32 = 3;

#[derive(Debug)]
pub enum CliError {
    /// Bad flags or unreadable inputs.
    Usage(String),
    /// Inputs that parse but violate a schema or model constraint.
    Invalid(String),
    /// The numeric checks found a discrepancy.
    CheckFailed(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => EXIT_USAGE,
            CliError::Invalid(_) => EXIT_INVALID,
            CliError::CheckFailed(_) => EXIT_CHECK_FAILED,
        }
    }

    fn message(&self) -> &str {
        match self {
            CliError::Usage(m) | CliError::Invalid(m) | CliError::CheckFailed(m) => m,
        }
    }
}

macro_rules! invalid_from {
    ($($t:ty),*) => {$(
        impl From<$t> for CliError {
            fn from(e: $t) -> Self {
                CliError::Invalid(e.to_string())
            }
        }
    )*};
}

invalid_from!(GraphError, StrategyError, EvalError, OptError, OracleError, GenError);

type Result<T> = std::result::Result<T, CliError>;

/// Parses `argv` (program name first), runs the subcommand and returns the
/// process exit code. Errors go to standard error.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let argv: Vec<OsString> = argv.into_iter().map(Into::into).collect();
    let cli = match Cli::try_parse_from(&argv) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => EXIT_OK,
                _ => EXIT_USAGE,
            };
        }
    };
    match dispatch(cli, &argv) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {}", e.message());
            e.exit_code()
        }
    }
}

fn dispatch(cli: Cli, argv: &[OsString]) -> Result<()> {
    match cli.command {
        Command::Generate(a) => generate(&a),
        Command::Solve(a) => solve(&a, argv),
        Command::Eval(a) => eval(&a),
        Command::Check(a) => check::run(&a),
        Command::Bench(a) => bench(&a),
    }
}

pub(crate) fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| CliError::Usage(format!("cannot read {}: {e}", path.display())))
}

pub(crate) fn read_graph(path: &Path) -> Result<PatrollingGraph> {
    Ok(parse_graph(&read_text(path)?)?)
}

/// Writes `text` to `path`, or to standard output when absent.
pub(crate) fn emit(path: Option<&Path>, text: &str) -> Result<()> {
    match path {
        Some(p) => write_file(p, text),
        None => {
            let mut out = std::io::stdout().lock();
            out.write_all(text.as_bytes())
                .and_then(|_| out.flush())
                .map_err(|e| CliError::Usage(format!("cannot write to standard output: {e}")))
        }
    }
}

pub(crate) fn write_file(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| CliError::Usage(format!("cannot write {}: {e}", path.display())))
}

pub(crate) fn to_json<T: serde::Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("documents serialize");
    s.push('\n');
    s
}

fn required<T: Copy>(v: Option<T>, flag: &str, family: &str) -> Result<T> {
    v.ok_or_else(|| CliError::Usage(format!("--{flag} is required for --family {family}")))
}

fn build_graph(f: &FamilyArgs) -> Result<PatrollingGraph> {
    let cost_range = (f.cost_min, f.cost_max);
    match f.family {
        Family::Grid => {
            let spec = GridSpec {
                cost_range,
                attack_time_rule: f.attack_time_rule.into(),
                beta_rule: f.beta_rule.into(),
                ..GridSpec::new(required(f.n, "n", "grid")?, required(f.k, "k", "grid")?, f.seed)
            };
            Ok(gen_grid(&spec)?)
        }
        Family::Points => {
            let points: Vec<(i64, i64)> = match (&f.points, f.synthetic_layout) {
                (Some(p), _) => serde_json::from_str(&read_text(p)?)
                    .map_err(|e| CliError::Invalid(format!("{}: expected [[x, y], ...]: {e}", p.display())))?,
                (None, true) => SYNTHETIC_ATM_LAYOUT.to_vec(),
                (None, false) => {
                    return Err(CliError::Usage(
                        "--family points needs --points FILE or --synthetic-layout".to_string(),
                    ))
                }
            };
            let spec = PointsSpec {
                seed: f.seed,
                cost_range,
                attack_time_rule: f.attack_time_rule.into(),
                beta_rule: f.beta_rule.into(),
            };
            Ok(gen_points_complete(&points, &spec)?)
        }
        Family::Office => {
            let mut ov = if f.tight_tour {
                OfficeOverrides::TIGHT_TOUR
            } else {
                OfficeOverrides::default()
            };
            if f.detection.is_some() {
                ov.detection = f.detection;
            }
            if f.attack_time.is_some() {
                ov.attack_time = f.attack_time;
            }
            let floors = f.floors.unwrap_or(1);
            if f.tight_tour && floors != 1 {
                return Err(CliError::Usage("--tight-tour needs a single floor".to_string()));
            }
            Ok(gen_office_with(floors, ov)?)
        }
    }
}

/// Short `key=value` description of the instance, free of commas.
fn family_params(f: &FamilyArgs) -> String {
    let mut s = String::new();
    match f.family {
        Family::Grid => {
            let _ = write!(s, "n={} k={} seed={}", f.n.unwrap_or(0), f.k.unwrap_or(0), f.seed);
        }
        Family::Points => {
            let src = match &f.points {
                Some(p) => p.display().to_string().replace(',', "_"),
                None => "synthetic".to_string(),
            };
            let _ = write!(s, "points={src} seed={}", f.seed);
        }
        Family::Office => {
            let _ = write!(s, "floors={}", f.floors.unwrap_or(1));
            if f.tight_tour {
                s.push_str(" tight");
            }
            if let Some(d) = f.detection {
                let _ = write!(s, " detection={d}");
            }
            if let Some(t) = f.attack_time {
                let _ = write!(s, " attack_time={t}");
            }
        }
    }
    if !matches!(f.family, Family::Office) {
        let _ = write!(s, " rule={:?} beta={:?}", f.attack_time_rule, f.beta_rule);
        s = s.to_lowercase();
    }
    s
}

fn family_name(f: Family) -> &'static str {
    match f {
        Family::Grid => "grid",
        Family::Points => "points",
        Family::Office => "office",
    }
}

fn generate(a: &GenerateArgs) -> Result<()> {
    let g = build_graph(&a.family)?;
    let mut text = g.to_json();
    text.push('\n');
    emit(a.output.as_deref(), &text)
}

fn memory_index(g: &PatrollingGraph, a: &SolveArgs) -> Result<StrategyIndex> {
    match (a.mem, &a.mem_file) {
        (Some(m), _) => Ok(StrategyIndex::uniform(g, m)?),
        (None, Some(p)) => {
            let mem: HashMap<String, i64> = serde_json::from_str(&read_text(p)?)
                .map_err(|e| CliError::Invalid(format!("{}: expected an object of memory sizes: {e}", p.display())))?;
            Ok(StrategyIndex::from_named(g, &mem)?)
        }
        (None, None) => Err(CliError::Usage("one of --mem or --mem-file is required".to_string())),
    }
}

fn solve(a: &SolveArgs, argv: &[OsString]) -> Result<()> {
    let started = manifest::unix_time();
    let graph_text = read_text(&a.graph)?;
    let g = parse_graph(&graph_text)?;
    let index = memory_index(&g, a)?;
    let cfg = a.optimizer.config();

    let clock = Instant::now();
    let result = regstar(&g, &index, a.restarts, &cfg, a.seed)?;
    let wall = clock.elapsed().as_secs_f64();

    let doc = RunResultDoc::new(&g, &index, &result, a.timing.then_some(wall));
    let result_text = to_json(&doc);
    let mut strategy_text = strategy_to_json(&g, &index, &result.best.final_strategy);
    strategy_text.push('\n');

    fs::create_dir_all(&a.out_dir)
        .map_err(|e| CliError::Usage(format!("cannot create {}: {e}", a.out_dir.display())))?;
    let artifacts = [("result.json", &result_text), ("strategy.json", &strategy_text)];
    for (name, text) in artifacts {
        write_file(&a.out_dir.join(name), text)?;
    }
    let m = manifest::RunManifest::new(
        argv,
        "solve",
        &cfg,
        a.restarts,
        a.seed,
        &graph_text,
        &artifacts,
        started,
        wall,
    );
    write_file(&a.out_dir.join("manifest.json"), &to_json(&m))
}

fn eval(a: &EvalArgs) -> Result<()> {
    let g = read_graph(&a.graph)?;
    let (index, sigma) = parse_strategy(&g, &read_text(&a.strategy)?)?;
    let table = protection_table(&g, &index, &sigma)?;
    let report = hard_value(&table, &g, &index, &sigma, a.epsilon_support)?;
    let doc = EvaluationReport::new(&g, &index, &sigma, &table, &report, a.epsilon_support);
    emit(a.output.as_deref(), &to_json(&doc))
}

pub const BENCH_HEADER: &str = "family,params,m,restarts,best,close_pct,iters_avg,time_s_avg";

fn bench(a: &BenchArgs) -> Result<()> {
    let g = build_graph(&a.family)?;
    let cfg = a.optimizer.config();
    let params = family_params(&a.family);
    let mut csv = String::from(BENCH_HEADER);
    csv.push('\n');
    for &m in &a.mem {
        let index = StrategyIndex::uniform(&g, m)?;
        let r = regstar(&g, &index, a.restarts, &cfg, a.driver_seed)?;
        let n = r.all_values.len() as f64;
        let iters = r.all_iterations.iter().sum::<usize>() as f64 / n;
        let time = r.all_wall_times.iter().map(|t| t.as_secs_f64()).sum::<f64>() / n;
        let _ = writeln!(
            csv,
            "{},{},{},{},{:.4},{:.1},{:.1},{:.4}",
            family_name(a.family.family),
            params,
            m,
            a.restarts,
            r.best.final_value,
            100.0 * r.close_fraction,
            iters,
            time
        );
    }
    emit(a.output.as_deref(), &csv)
}
