//! Dueling bandits on partially ordered sets.
//!
//! The crate simulates duels against a ground-truth poset with preference
//! gaps, and implements algorithms that recover its Pareto front from noisy
//! pairwise outcomes: UnchainedBandits (peeling plus decoys), SlicingBandits
//! for fully observable posets, and a uniform-sampling baseline. Bound
//! calculators, a random poset generator, a ratings-file duel oracle and an
//! experiment harness complete the toolkit.

pub mod analysis;
pub mod compare;
pub mod env;
pub mod error;
pub mod generator;
pub mod harness;
pub mod poset;
pub mod ratings;
pub mod slicing;
pub mod trace;
pub mod uniform;
pub mod unchained;

pub use analysis::{
    bound_report, brute_force_eps_front, brute_force_front, pareto_gap, peeling_cost, regret_bounds, sample_budget,
    BoundReport, BudgetBreakdown, RegretBounds,
};
pub use compare::{
    confidence_radius, decoy_compare, direct_compare, stopping_horizon, CompareOptions, ConfidenceMode, PairStats,
    StatsStore, Verdict,
};
pub use env::{DuelEnvironment, DuelOutcome, DuelSource, Observability, RunRng};
pub use error::{Error, Result};
pub use poset::{Arm, ArmSet, PosetFile, PosetModel, DEFAULT_ANALYSIS_CAP};
pub use trace::{ChainRecord, EpochKind, EpochRecord, RunTrace, VerdictLog};
pub use unchained::{
    estimate_alpha, ubs_routine, unchained_bandits, unchained_bandits_observed, Comparer, PeelingMode,
    PeelingSchedule, UbsObserver,
};
pub use generator::{generate_poset, GeneratorConfig};
pub use harness::{run_experiment, Algorithm, AggregateRow, ExperimentConfig, ExperimentSummary, RunMode, Sweep, SweepParam};
pub use ratings::{load_ratings, ratings_duel, FrontListing, RatingsOracle, RatingsTable};
pub use slicing::{
    default_chain_max, extract_maximal_chain, slicing_bandits, ChainConfidence, ChainMax, ComparabilityMemo,
    KnockoutChainMax,
};
pub use uniform::uniform_sampling;
