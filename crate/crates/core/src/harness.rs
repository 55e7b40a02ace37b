//! Seeded experiment grids: generate or load inputs, run an algorithm on
//! every (sweep value, seed) cell in parallel, check the result against the
//! ground truth, and aggregate.

use std::path::{Path, PathBuf};

use log::warn;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::analysis::{bound_report, BoundReport};
use crate::compare::{CompareOptions, ConfidenceMode};
use crate::env::{DuelEnvironment, Observability};
use crate::error::{Error, Result};
use crate::generator::{generate_poset, GeneratorConfig};
use crate::poset::{ArmSet, PosetModel, DEFAULT_ANALYSIS_CAP};
use crate::ratings::{load_ratings, FrontListing, RatingsOracle, RatingsTable};
use crate::slicing::{slicing_bandits, ChainConfidence, KnockoutChainMax};
use crate::trace::RunTrace;
use crate::uniform::uniform_sampling;
use crate::unchained::{unchained_bandits, PeelingSchedule};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Algorithm {
    Unchained,
    Slicing,
    Uniform,
}

impl Algorithm {
    pub fn name(self) -> &'static str {
        match self {
            Algorithm::Unchained => "unchained",
            Algorithm::Slicing => "slicing",
            Algorithm::Uniform => "uniform",
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RunMode {
    #[default]
    Exact,
    EpsApprox,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SweepParam {
    Width,
    Height,
    ParetoSize,
}

impl SweepParam {
    pub fn name(self) -> &'static str {
        match self {
            SweepParam::Width => "width",
            SweepParam::Height => "height",
            SweepParam::ParetoSize => "pareto-size",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Sweep {
    pub param: SweepParam,
    pub values: Vec<usize>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RatingsInput {
    pub path: PathBuf,
    #[serde(default = "default_min_count")]
    pub min_count: usize,
}

fn default_min_count() -> usize {
    50_000
}
fn default_delta() -> f64 {
    0.001
}
fn default_delta_gap() -> f64 {
    0.01
}
fn default_rate() -> f64 {
    crate::unchained::DEFAULT_RATE
}
fn default_eps0() -> f64 {
    crate::unchained::DEFAULT_EPS0
}
fn default_cap() -> usize {
    DEFAULT_ANALYSIS_CAP
}
fn default_true() -> bool {
    true
}

/// A full experiment description, loadable from JSON.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub algorithm: Algorithm,
    #[serde(default)]
    pub mode: RunMode,
    /// Target precision in ε-approximation mode (defaults to `delta_gap`).
    #[serde(default)]
    pub eps: Option<f64>,
    #[serde(default)]
    pub generator: Option<GeneratorConfig>,
    #[serde(default)]
    pub poset: Option<PathBuf>,
    #[serde(default)]
    pub ratings: Option<RatingsInput>,
    #[serde(default = "default_delta")]
    pub delta: f64,
    #[serde(default = "default_delta_gap")]
    pub delta_gap: f64,
    #[serde(default = "default_rate")]
    pub rate: f64,
    #[serde(default = "default_eps0")]
    pub eps0: f64,
    /// Epoch count `N`; derived from `Δ·√K` (or the ε target) when absent.
    #[serde(default)]
    pub epochs: Option<usize>,
    #[serde(default)]
    pub confidence: ConfidenceMode,
    #[serde(default)]
    pub chain_confidence: ChainConfidence,
    pub seeds: Vec<u64>,
    #[serde(default)]
    pub sweep: Option<Sweep>,
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
    #[serde(default = "default_cap")]
    pub analysis_cap: usize,
    #[serde(default = "default_true")]
    pub write_traces: bool,
}

impl ExperimentConfig {
    /// A config over generated posets with default parameters.
    pub fn generated(algorithm: Algorithm, generator: GeneratorConfig, seeds: Vec<u64>) -> Self {
        ExperimentConfig {
            algorithm,
            mode: RunMode::Exact,
            eps: None,
            generator: Some(generator),
            poset: None,
            ratings: None,
            delta: default_delta(),
            delta_gap: default_delta_gap(),
            rate: default_rate(),
            eps0: default_eps0(),
            epochs: None,
            confidence: ConfidenceMode::Anytime,
            chain_confidence: ChainConfidence::Proportional,
            seeds,
            sweep: None,
            output_dir: None,
            analysis_cap: default_cap(),
            write_traces: true,
        }
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Ok(serde_json::from_str(&text)?)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidParameter(m.to_string()));
        let sources = [self.generator.is_some(), self.poset.is_some(), self.ratings.is_some()];
        if sources.iter().filter(|&&s| s).count() != 1 {
            return bad("exactly one of generator, poset or ratings must be given");
        }
        if self.seeds.is_empty() {
            return bad("at least one seed is required");
        }
        if let Some(sweep) = &self.sweep {
            if self.generator.is_none() {
                return bad("a sweep needs a generator input");
            }
            if sweep.values.is_empty() || sweep.values.contains(&0) {
                return bad("sweep values must be a non-empty list of positive integers");
            }
        }
        if self.ratings.is_some() && (self.algorithm != Algorithm::Unchained || self.mode != RunMode::EpsApprox) {
            return Err(Error::Mode("ratings inputs run unchained in eps_approx mode only".into()));
        }
        if self.mode == RunMode::EpsApprox && self.algorithm != Algorithm::Unchained {
            return Err(Error::Mode("eps_approx mode applies to the unchained algorithm only".into()));
        }
        if let Some(g) = &self.generator {
            for v in self.sweep_values() {
                self.generator_for(g, v, 0).validate()?;
            }
        }
        self.schedule(1)?.validate()?;
        Ok(())
    }

    fn sweep_values(&self) -> Vec<Option<usize>> {
        match &self.sweep {
            Some(s) => s.values.iter().map(|&v| Some(v)).collect(),
            None => vec![None],
        }
    }

    fn generator_for(&self, base: &GeneratorConfig, value: Option<usize>, seed: u64) -> GeneratorConfig {
        let mut g = *base;
        if let (Some(s), Some(v)) = (&self.sweep, value) {
            match s.param {
                SweepParam::Width => g.width = v,
                SweepParam::Height => g.height = v,
                SweepParam::ParetoSize => g.pareto = v,
            }
        }
        g.seed = derive_seed(seed, value.unwrap_or(0) as u64, 1);
        g
    }

    /// The UnchainedBandits schedule for `k` arms.
    pub fn schedule(&self, k: usize) -> Result<PeelingSchedule> {
        let mut s = match self.mode {
            RunMode::Exact => PeelingSchedule::exact_with(k, self.eps0, self.rate, self.delta_gap, self.delta),
            RunMode::EpsApprox => {
                PeelingSchedule::eps_approx_with(self.eps.unwrap_or(self.delta_gap), self.eps0, self.rate, self.delta)
            }
        };
        if let Some(n) = self.epochs {
            s.epochs = n;
        }
        s.confidence = self.confidence;
        Ok(s)
    }
}

/// splitmix64 finalizer.
fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    x = (x ^ (x >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    x ^ (x >> 31)
}

/// Independent seed for stream `stream` of cell `(seed, value)`.
pub fn derive_seed(seed: u64, value: u64, stream: u64) -> u64 {
    splitmix64(splitmix64(splitmix64(seed) ^ value) ^ stream)
}

/// Result of one (sweep value, seed) cell.
#[derive(Clone, Debug)]
pub struct CellResult {
    pub sweep_value: Option<usize>,
    pub seed: u64,
    pub algorithm: Algorithm,
    /// Ground truth, for simulated inputs.
    pub model: Option<PosetModel>,
    pub front: ArmSet,
    pub success: Option<bool>,
    pub trace: RunTrace,
    pub bounds: Option<BoundReport>,
    pub listing: Option<FrontListing>,
}

/// One line of the aggregate CSV.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AggregateRow {
    pub sweep_param: String,
    pub sweep_value: Option<usize>,
    pub algorithm: String,
    pub mean_duels: f64,
    pub std_duels: f64,
    pub mean_regret: f64,
    pub success_rate: Option<f64>,
    pub n_seeds: usize,
}

#[derive(Clone, Debug)]
pub struct ExperimentSummary {
    pub cells: Vec<CellResult>,
    pub aggregates: Vec<AggregateRow>,
}

impl ExperimentSummary {
    pub fn aggregate_csv(&self) -> Result<String> {
        aggregate_csv(&self.aggregates)
    }
}

pub fn aggregate_csv(rows: &[AggregateRow]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

enum Input {
    Generated(GeneratorConfig),
    Model(PosetModel),
    Ratings(RatingsTable),
}

/// Runs every cell of `config` and writes outputs when `output_dir` is set.
pub fn run_experiment(config: &ExperimentConfig) -> Result<ExperimentSummary> {
    config.validate()?;
    let input = if let Some(g) = &config.generator {
        Input::Generated(*g)
    } else if let Some(p) = &config.poset {
        Input::Model(PosetModel::load(p)?)
    } else {
        let r = config.ratings.as_ref().expect("validated");
        Input::Ratings(load_ratings(&r.path, r.min_count)?)
    };
    let jobs: Vec<(Option<usize>, u64)> = config
        .sweep_values()
        .into_iter()
        .flat_map(|v| config.seeds.iter().map(move |&s| (v, s)))
        .collect();
    let cells: Vec<CellResult> = jobs
        .par_iter()
        .map(|&(value, seed)| run_cell(config, &input, value, seed))
        .collect::<Result<_>>()?;
    let aggregates = aggregate(config, &cells);
    let summary = ExperimentSummary { cells, aggregates };
    if let Some(dir) = &config.output_dir {
        write_outputs(config, &summary, dir)?;
    }
    Ok(summary)
}

fn run_cell(config: &ExperimentConfig, input: &Input, value: Option<usize>, seed: u64) -> Result<CellResult> {
    let env_seed = derive_seed(seed, value.unwrap_or(0) as u64, 2);
    let model = match input {
        Input::Generated(g) => generate_poset(&config.generator_for(g, value, seed))?,
        Input::Model(m) => m.clone(),
        Input::Ratings(table) => return run_ratings_cell(config, table, seed, env_seed),
    };
    let k = model.arm_count();
    let opts = CompareOptions {
        confidence: config.confidence,
        max_duels: None,
    };
    let observability = match config.algorithm {
        Algorithm::Slicing => Observability::Full,
        _ => Observability::Partial,
    };
    let mut env = DuelEnvironment::new(model.clone(), observability, env_seed)?;
    let (front, mut trace) = match config.algorithm {
        Algorithm::Unchained => unchained_bandits(&mut env, &config.schedule(k)?)?,
        Algorithm::Slicing => slicing_bandits(&mut env, config.delta, &KnockoutChainMax { opts }, config.chain_confidence)?,
        Algorithm::Uniform => uniform_sampling(&mut env, config.delta_gap, config.delta, opts)?,
    };
    let success = match config.mode {
        RunMode::Exact => front == model.pareto_front(),
        RunMode::EpsApprox => model.is_eps_approximation(&front, config.eps.unwrap_or(config.delta_gap)),
    };
    trace.success = Some(success);
    let bounds = if config.algorithm == Algorithm::Unchained {
        match bound_report(&model, &trace, config.analysis_cap) {
            Ok(b) => Some(b),
            Err(e @ Error::AnalysisCapExceeded { .. }) => {
                warn!("no bound report for seed {seed}: {e}");
                None
            }
            Err(e) => return Err(e),
        }
    } else {
        None
    };
    Ok(CellResult {
        sweep_value: value,
        seed,
        algorithm: config.algorithm,
        model: Some(model),
        front,
        success: Some(success),
        trace,
        bounds,
        listing: None,
    })
}

fn run_ratings_cell(config: &ExperimentConfig, table: &RatingsTable, seed: u64, env_seed: u64) -> Result<CellResult> {
    let mut oracle = RatingsOracle::new(table, env_seed);
    let (front, trace) = unchained_bandits(&mut oracle, &config.schedule(table.item_count())?)?;
    let listing = FrontListing::build(table, oracle.tallies(), &front);
    Ok(CellResult {
        sweep_value: None,
        seed,
        algorithm: config.algorithm,
        model: None,
        front,
        success: None,
        trace,
        bounds: None,
        listing: Some(listing),
    })
}

fn aggregate(config: &ExperimentConfig, cells: &[CellResult]) -> Vec<AggregateRow> {
    let param = config.sweep.as_ref().map_or("none", |s| s.param.name());
    config
        .sweep_values()
        .into_iter()
        .map(|v| {
            let group: Vec<&CellResult> = cells.iter().filter(|c| c.sweep_value == v).collect();
            let n = group.len() as f64;
            let duels: Vec<f64> = group.iter().map(|c| c.trace.total_duels as f64).collect();
            let mean = duels.iter().sum::<f64>() / n;
            let var = if group.len() > 1 {
                duels.iter().map(|d| (d - mean).powi(2)).sum::<f64>() / (n - 1.0)
            } else {
                0.0
            };
            let judged: Vec<bool> = group.iter().filter_map(|c| c.success).collect();
            AggregateRow {
                sweep_param: param.to_string(),
                sweep_value: v,
                algorithm: config.algorithm.name().to_string(),
                mean_duels: mean,
                std_duels: var.sqrt(),
                mean_regret: group.iter().map(|c| c.trace.total_regret).sum::<f64>() / n,
                success_rate: (!judged.is_empty())
                    .then(|| judged.iter().filter(|&&s| s).count() as f64 / judged.len() as f64),
                n_seeds: group.len(),
            }
        })
        .collect()
}

fn write_outputs(config: &ExperimentConfig, summary: &ExperimentSummary, dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    std::fs::write(dir.join("aggregate.csv"), summary.aggregate_csv()?)?;
    if !config.write_traces {
        return Ok(());
    }
    for c in &summary.cells {
        let stem = match c.sweep_value {
            Some(v) => format!("{}_{}{}_seed{}", c.algorithm.name(), config.sweep.as_ref().map_or("", |s| s.param.name()), v, c.seed),
            None => format!("{}_seed{}", c.algorithm.name(), c.seed),
        };
        c.trace.save(dir.join(format!("{stem}.trace.json")))?;
        if let Some(b) = &c.bounds {
            std::fs::write(dir.join(format!("{stem}.bounds.json")), serde_json::to_string_pretty(b)?)?;
        }
        if let Some(m) = &c.model {
            m.save(dir.join(format!("{stem}.poset.json")))?;
        }
        if let Some(l) = &c.listing {
            std::fs::write(dir.join(format!("{stem}.front.json")), l.to_json()?)?;
            std::fs::write(dir.join(format!("{stem}.front.csv")), l.items_csv()?)?;
        }
    }
    Ok(())
}
