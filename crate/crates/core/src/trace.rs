//! Run records shared by all algorithms.

use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::compare::Verdict;
use crate::error::Result;
use crate::poset::{Arm, ArmSet};
use crate::unchained::PeelingSchedule;

/// Which comparer an epoch used.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EpochKind {
    Direct,
    Decoy,
    /// One elimination sweep of the uniform baseline.
    Sweep,
}

/// One call to the UBS routine (or one baseline phase).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub eps: f64,
    pub kind: EpochKind,
    /// `|S_t|`, the input set size.
    pub input_size: usize,
    /// `S_{t+1}`.
    pub survivors: ArmSet,
    pub duels: u64,
    pub regret: f64,
    /// Confidence handed to each pairwise test.
    pub call_delta: f64,
}

/// One iteration of the slicing loop.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChainRecord {
    pub iteration: usize,
    pub chain: Vec<Arm>,
    pub chain_max: Arm,
    pub chain_max_duels: u64,
    pub probe_duels: u64,
    pub pruned: usize,
}

/// Everything an experiment needs to know about one run.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct RunTrace {
    pub algorithm: String,
    pub arm_count: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub schedule: Option<PeelingSchedule>,
    #[serde(default)]
    pub epochs: Vec<EpochRecord>,
    #[serde(default)]
    pub chains: Vec<ChainRecord>,
    pub front: ArmSet,
    pub total_duels: u64,
    pub total_regret: f64,
    pub peeling_duels: u64,
    pub peeling_regret: f64,
    pub decoy_duels: u64,
    /// Decoy-phase regret including the decoys' own gaps.
    pub decoy_regret: f64,
    /// Decoy-phase regret carried by base arms only.
    pub decoy_regret_base: f64,
    pub probe_duels: u64,
    pub verdicts: u64,
    pub verdict_digest: String,
    /// Filled in by the harness when ground truth is known.
    #[serde(default)]
    pub success: Option<bool>,
}

impl RunTrace {
    pub fn new(algorithm: &str, arm_count: usize) -> Self {
        RunTrace {
            algorithm: algorithm.to_string(),
            arm_count,
            ..Default::default()
        }
    }

    /// Sizes `|S_1|, ..., |S_N|` of the sets fed to each epoch.
    pub fn input_sizes(&self) -> Vec<usize> {
        self.epochs.iter().map(|e| e.input_size).collect()
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_json()?)?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Ok(serde_json::from_str(&text)?)
    }
}

/// Rolling SHA-256 over every verdict a run produced.
#[derive(Clone, Default)]
pub struct VerdictLog {
    hasher: Sha256,
    count: u64,
}

impl VerdictLog {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, a: Arm, b: Arm, v: &Verdict) {
        let tag: u8 = match v {
            Verdict::FirstBeatsSecond => 1,
            Verdict::SecondBeatsFirst => 2,
            Verdict::IndistinguishableAt(_) => 3,
            Verdict::Incomparable => 4,
        };
        self.hasher.update((a as u64).to_le_bytes());
        self.hasher.update((b as u64).to_le_bytes());
        self.hasher.update([tag]);
        self.count += 1;
    }

    pub fn count(&self) -> u64 {
        self.count
    }

    pub fn digest(&self) -> String {
        hex::encode(self.hasher.clone().finalize())
    }
}
