//! `posetduel`: generate posets, run dueling-bandit experiments and check
//! their bounds.
//!
//! Exit codes: 0 on success, 1 on usage or validation errors, 2 on runtime
//! errors.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use posetduel::harness::RatingsInput;
use posetduel::{
    bound_report, brute_force_eps_front, generate_poset, run_experiment, Algorithm, ChainConfidence, ConfidenceMode,
    Error, ExperimentConfig, GeneratorConfig, PosetModel, RunMode, RunTrace, Sweep, SweepParam,
};

#[derive(Parser)]
#[command(name = "posetduel", version, about = "Dueling bandits on partially ordered sets")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a random poset and write it as JSON.
    Generate(GenerateArgs),
    /// Run an experiment grid and write traces plus an aggregate CSV.
    Run(RunArgs),
    /// Compute the bound report of a trace against its poset.
    Analyze(AnalyzeArgs),
    /// Print the exact Pareto front (or a largest ε-approximation) of a poset.
    Front(FrontArgs),
    /// Run UnchainedBandits in ε-approximation mode on a ratings file.
    Dataset(DatasetArgs),
}

#[derive(Args)]
struct GenerateArgs {
    #[arg(long)]
    pareto: usize,
    #[arg(long)]
    width: usize,
    #[arg(long)]
    height: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 0.05)]
    gamma_low: f64,
    #[arg(long, default_value_t = 0.45)]
    gamma_high: f64,
    /// Output file; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum AlgArg {
    Unchained,
    Slicing,
    Uniform,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Exact,
    EpsApprox,
}

#[derive(Clone, Copy, ValueEnum)]
enum ConfidenceArg {
    Anytime,
    FixedBudget,
}

#[derive(Clone, Copy, ValueEnum)]
enum ChainConfidenceArg {
    Proportional,
    Uniform,
}

#[derive(Clone, Copy, ValueEnum)]
enum SweepArg {
    Width,
    Height,
    ParetoSize,
}

/// Schedule flags shared by `run` and `dataset`. Each overrides the config.
#[derive(Args)]
struct ScheduleArgs {
    /// Confidence parameter δ.
    #[arg(long)]
    delta: Option<f64>,
    /// Decoy gap Δ.
    #[arg(long)]
    delta_gap: Option<f64>,
    /// Peeling rate.
    #[arg(long)]
    rate: Option<f64>,
    #[arg(long)]
    eps0: Option<f64>,
    /// Epoch count; derived from Δ and K when absent.
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long, value_enum)]
    confidence: Option<ConfidenceArg>,
}

#[derive(Args)]
struct RunArgs {
    /// Experiment config (JSON). Flags override its fields.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, value_enum)]
    algorithm: Option<AlgArg>,
    #[arg(long, value_enum)]
    mode: Option<ModeArg>,
    /// Target precision in eps-approx mode.
    #[arg(long)]
    eps: Option<f64>,
    #[arg(long)]
    pareto: Option<usize>,
    #[arg(long)]
    width: Option<usize>,
    #[arg(long)]
    height: Option<usize>,
    /// Run on a fixed poset file instead of generated ones.
    #[arg(long, conflicts_with_all = ["pareto", "width", "height"])]
    poset: Option<PathBuf>,
    /// First seed of the grid.
    #[arg(long)]
    seed: Option<u64>,
    /// Number of consecutive seeds.
    #[arg(long)]
    runs: Option<u64>,
    #[arg(long, value_enum, requires = "values")]
    sweep: Option<SweepArg>,
    /// Comma-separated sweep values.
    #[arg(long, value_delimiter = ',', requires = "sweep")]
    values: Option<Vec<usize>>,
    #[arg(long, value_enum)]
    chain_confidence: Option<ChainConfidenceArg>,
    /// Skip per-cell trace files.
    #[arg(long)]
    no_traces: bool,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    #[command(flatten)]
    schedule: ScheduleArgs,
}

#[derive(Args)]
struct AnalyzeArgs {
    #[arg(long)]
    trace: PathBuf,
    #[arg(long)]
    poset: PathBuf,
    /// Largest arm set for exact combinatorial analysis.
    #[arg(long, default_value_t = posetduel::DEFAULT_ANALYSIS_CAP)]
    cap: usize,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct FrontArgs {
    #[arg(long)]
    poset: PathBuf,
    /// Report a largest ε-approximation instead of the exact front.
    #[arg(long)]
    eps: Option<f64>,
    #[arg(long, default_value_t = posetduel::DEFAULT_ANALYSIS_CAP)]
    cap: usize,
}

#[derive(Args)]
struct DatasetArgs {
    /// CSV with header `user,item,rating[,timestamp]`.
    #[arg(long)]
    ratings: PathBuf,
    /// Keep items with at least this many ratings.
    #[arg(long, default_value_t = 50_000)]
    min_count: usize,
    #[arg(long, default_value_t = 0.05)]
    eps: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 1)]
    runs: u64,
    #[arg(long)]
    out: Option<PathBuf>,
    #[command(flatten)]
    schedule: ScheduleArgs,
}

#[derive(Debug, thiserror::Error)]
enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Core(#[from] Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Core(e) if e.is_validation() => 1,
            _ => 2,
        }
    }
}

type CliResult<T> = std::result::Result<T, CliError>;

fn write_or_print(out: Option<&Path>, text: &str) -> CliResult<()> {
    match out {
        Some(p) => std::fs::write(p, text)?,
        None => println!("{text}"),
    }
    Ok(())
}

fn generate(a: GenerateArgs) -> CliResult<()> {
    let mut cfg = GeneratorConfig::new(a.pareto, a.width, a.height, a.seed);
    cfg.gamma_low = a.gamma_low;
    cfg.gamma_high = a.gamma_high;
    let model = generate_poset(&cfg)?;
    let text = serde_json::to_string_pretty(&model.to_file()).map_err(Error::from)?;
    write_or_print(a.out.as_deref(), &text)
}

fn apply_schedule(c: &mut ExperimentConfig, s: &ScheduleArgs) {
    if let Some(v) = s.delta {
        c.delta = v;
    }
    if let Some(v) = s.delta_gap {
        c.delta_gap = v;
    }
    if let Some(v) = s.rate {
        c.rate = v;
    }
    if let Some(v) = s.eps0 {
        c.eps0 = v;
    }
    if s.epochs.is_some() {
        c.epochs = s.epochs;
    }
    if let Some(v) = s.confidence {
        c.confidence = match v {
            ConfidenceArg::Anytime => ConfidenceMode::Anytime,
            ConfidenceArg::FixedBudget => ConfidenceMode::FixedBudget,
        };
    }
}

fn algorithm(a: AlgArg) -> Algorithm {
    match a {
        AlgArg::Unchained => Algorithm::Unchained,
        AlgArg::Slicing => Algorithm::Slicing,
        AlgArg::Uniform => Algorithm::Uniform,
    }
}

fn run_config(a: &RunArgs) -> CliResult<ExperimentConfig> {
    let mut c = match &a.config {
        Some(p) => ExperimentConfig::load(p)?,
        None => {
            let alg = a
                .algorithm
                .ok_or_else(|| CliError::Usage("either --config or --algorithm is required".into()))?;
            let mut c = ExperimentConfig::generated(algorithm(alg), GeneratorConfig::new(3, 4, 4, 0), vec![0]);
            if a.poset.is_some() {
                c.generator = None;
            }
            c
        }
    };
    if let Some(alg) = a.algorithm {
        c.algorithm = algorithm(alg);
    }
    if let Some(m) = a.mode {
        c.mode = match m {
            ModeArg::Exact => RunMode::Exact,
            ModeArg::EpsApprox => RunMode::EpsApprox,
        };
    }
    if a.eps.is_some() {
        c.eps = a.eps;
    }
    if let Some(p) = &a.poset {
        c.poset = Some(p.clone());
        c.generator = None;
        c.ratings = None;
    }
    if a.pareto.is_some() || a.width.is_some() || a.height.is_some() {
        let g = c.generator.get_or_insert(GeneratorConfig::new(3, 4, 4, 0));
        g.pareto = a.pareto.unwrap_or(g.pareto);
        g.width = a.width.unwrap_or(g.width);
        g.height = a.height.unwrap_or(g.height);
        c.poset = None;
        c.ratings = None;
    }
    if a.seed.is_some() || a.runs.is_some() {
        let first = a.seed.unwrap_or(0);
        c.seeds = (first..first + a.runs.unwrap_or(1)).collect();
    }
    if let (Some(s), Some(values)) = (a.sweep, &a.values) {
        let param = match s {
            SweepArg::Width => SweepParam::Width,
            SweepArg::Height => SweepParam::Height,
            SweepArg::ParetoSize => SweepParam::ParetoSize,
        };
        c.sweep = Some(Sweep { param, values: values.clone() });
    }
    if let Some(cc) = a.chain_confidence {
        c.chain_confidence = match cc {
            ChainConfidenceArg::Proportional => ChainConfidence::Proportional,
            ChainConfidenceArg::Uniform => ChainConfidence::Uniform,
        };
    }
    if a.no_traces {
        c.write_traces = false;
    }
    if a.out.is_some() {
        c.output_dir = a.out.clone();
    }
    apply_schedule(&mut c, &a.schedule);
    Ok(c)
}

fn run(a: RunArgs) -> CliResult<()> {
    let config = run_config(&a)?;
    let summary = run_experiment(&config)?;
    print!("{}", summary.aggregate_csv()?);
    Ok(())
}

fn analyze(a: AnalyzeArgs) -> CliResult<()> {
    let model = PosetModel::load(&a.poset)?;
    let trace = RunTrace::load(&a.trace)?;
    let report = bound_report(&model, &trace, a.cap)?;
    let text = serde_json::to_string_pretty(&report).map_err(Error::from)?;
    write_or_print(a.out.as_deref(), &text)
}

fn front(a: FrontArgs) -> CliResult<()> {
    let model = PosetModel::load(&a.poset)?;
    let set = match a.eps {
        Some(eps) => brute_force_eps_front(&model, eps, a.cap)?,
        None => model.pareto_front(),
    };
    let text = serde_json::to_string(&set.to_vec()).map_err(Error::from)?;
    println!("{text}");
    Ok(())
}

fn dataset(a: DatasetArgs) -> CliResult<()> {
    let mut c = ExperimentConfig::generated(Algorithm::Unchained, GeneratorConfig::new(1, 1, 1, 0), vec![]);
    c.generator = None;
    c.ratings = Some(RatingsInput { path: a.ratings.clone(), min_count: a.min_count });
    c.mode = RunMode::EpsApprox;
    c.eps = Some(a.eps);
    c.seeds = (a.seed..a.seed + a.runs).collect();
    c.output_dir = a.out.clone();
    apply_schedule(&mut c, &a.schedule);
    let summary = run_experiment(&c)?;
    for cell in &summary.cells {
        if let Some(listing) = &cell.listing {
            println!("seed {}: {} duels", cell.seed, cell.trace.total_duels);
            print!("{}", listing.items_csv()?);
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let result = match cli.command {
        Command::Generate(a) => generate(a),
        Command::Run(a) => run(a),
        Command::Analyze(a) => analyze(a),
        Command::Front(a) => front(a),
        Command::Dataset(a) => dataset(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
