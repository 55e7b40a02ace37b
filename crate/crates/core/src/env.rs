//! Simulated duels against a ground-truth [`PosetModel`].

use std::collections::HashMap;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::poset::{Arm, ArmSet, PosetModel};

/// The per-run random generator. One per environment.
pub type RunRng = ChaCha8Rng;

/// Whether a duel between incomparable arms reveals their incomparability.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Observability {
    /// Incomparable pairs behave as a fair coin.
    Partial,
    /// Incomparable pairs report `comparable = false` and no winner.
    Full,
}

/// Result of a single duel.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct DuelOutcome {
    pub winner: Option<Arm>,
    /// `None` under partial observability.
    pub comparable: Option<bool>,
}

/// Anything that can run duels: the simulator, or an oracle over real data.
pub trait DuelSource {
    fn duel(&mut self, i: Arm, j: Arm) -> Result<DuelOutcome>;

    fn duel_count(&self) -> u64;

    fn rng(&mut self) -> &mut RunRng;

    /// The arms the algorithms search over (decoys excluded).
    fn base_arms(&self) -> ArmSet;

    fn observability(&self) -> Observability {
        Observability::Partial
    }

    /// Cumulative regret, when a ground truth exists.
    fn regret(&self) -> f64 {
        0.0
    }

    /// Share of [`DuelSource::regret`] carried by base (non-decoy) arms.
    fn base_regret(&self) -> f64 {
        self.regret()
    }

    /// Whether [`DuelSource::decoy_of`] can succeed.
    fn supports_decoys(&self) -> bool {
        false
    }

    /// Returns a Δ-decoy of `a`, creating it on first use.
    fn decoy_of(&mut self, a: Arm, delta: f64) -> Result<Arm> {
        let _ = (a, delta);
        Err(Error::Mode("this duel source cannot create decoys".into()))
    }
}

/// One row of the optional duel log.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DuelRecord {
    pub t: u64,
    pub arm_i: Arm,
    pub arm_j: Arm,
    pub winner: Option<Arm>,
    pub comparable_flag: Option<bool>,
    pub cumulative_regret: f64,
}

/// Stochastic environment over a [`PosetModel`], tracking duels and regret.
#[derive(Clone, Debug)]
pub struct DuelEnvironment {
    model: PosetModel,
    base_k: usize,
    observability: Observability,
    rng: RunRng,
    duel_count: u64,
    regret: f64,
    base_regret: f64,
    gaps: Vec<f64>,
    decoys: HashMap<(Arm, u64), Arm>,
    log: Option<Vec<DuelRecord>>,
}

impl DuelEnvironment {
    pub fn new(model: PosetModel, observability: Observability, seed: u64) -> Result<Self> {
        model.validate()?;
        let gaps = compute_gaps(&model);
        Ok(DuelEnvironment {
            base_k: model.arm_count(),
            model,
            observability,
            rng: RunRng::seed_from_u64(seed),
            duel_count: 0,
            regret: 0.0,
            base_regret: 0.0,
            gaps,
            decoys: HashMap::new(),
            log: None,
        })
    }

    /// Keep a per-duel log from now on.
    pub fn with_duel_log(mut self) -> Self {
        self.log = Some(Vec::new());
        self
    }

    /// Current model, including any decoys added so far.
    pub fn model(&self) -> &PosetModel {
        &self.model
    }

    pub fn base_arm_count(&self) -> usize {
        self.base_k
    }

    pub fn is_decoy(&self, arm: Arm) -> bool {
        arm >= self.base_k
    }

    /// Distance of `i` to the Pareto front: 0 on the front, otherwise the
    /// smallest `γ_ji` over Pareto arms `j ≻ i`.
    pub fn arm_gap(&self, i: Arm) -> Result<f64> {
        self.gaps.get(i).copied().ok_or(Error::UnknownArm(i))
    }

    /// Regret charged for dueling `i` against `j`.
    pub fn regret_of_pair(&self, i: Arm, j: Arm) -> Result<f64> {
        Ok(self.arm_gap(i)? + self.arm_gap(j)?)
    }

    pub fn duel_log(&self) -> Option<&[DuelRecord]> {
        self.log.as_deref()
    }

    /// Writes the duel log as CSV (`t,arm_i,arm_j,winner,comparable_flag,cumulative_regret`).
    pub fn write_duel_log(&self, path: impl AsRef<Path>) -> Result<()> {
        let log = self
            .log
            .as_ref()
            .ok_or_else(|| Error::Mode("duel log not enabled".into()))?;
        let mut w = csv::Writer::from_path(path)?;
        for r in log {
            w.serialize(r)?;
        }
        w.flush()?;
        Ok(())
    }
}

impl DuelSource for DuelEnvironment {
    fn duel(&mut self, i: Arm, j: Arm) -> Result<DuelOutcome> {
        let k = self.model.arm_count();
        if i >= k {
            return Err(Error::UnknownArm(i));
        }
        if j >= k {
            return Err(Error::UnknownArm(j));
        }
        if i == j {
            return Err(Error::SameArm(i));
        }
        let outcome = match self.observability {
            Observability::Full if !self.model.comparable(i, j) => DuelOutcome {
                winner: None,
                comparable: Some(false),
            },
            obs => {
                let p = 0.5 + self.model.gamma(i, j);
                let winner = if self.rng.gen_bool(p) { i } else { j };
                DuelOutcome {
                    winner: Some(winner),
                    comparable: (obs == Observability::Full).then_some(true),
                }
            }
        };
        self.duel_count += 1;
        self.regret += self.gaps[i] + self.gaps[j];
        for a in [i, j] {
            if a < self.base_k {
                self.base_regret += self.gaps[a];
            }
        }
        if let Some(log) = self.log.as_mut() {
            log.push(DuelRecord {
                t: self.duel_count,
                arm_i: i,
                arm_j: j,
                winner: outcome.winner,
                comparable_flag: outcome.comparable,
                cumulative_regret: self.regret,
            });
        }
        Ok(outcome)
    }

    fn duel_count(&self) -> u64 {
        self.duel_count
    }

    fn rng(&mut self) -> &mut RunRng {
        &mut self.rng
    }

    fn base_arms(&self) -> ArmSet {
        (0..self.base_k).collect()
    }

    fn observability(&self) -> Observability {
        self.observability
    }

    fn regret(&self) -> f64 {
        self.regret
    }

    fn base_regret(&self) -> f64 {
        self.base_regret
    }

    fn supports_decoys(&self) -> bool {
        true
    }

    fn decoy_of(&mut self, a: Arm, delta: f64) -> Result<Arm> {
        if let Some(&d) = self.decoys.get(&(a, delta.to_bits())) {
            return Ok(d);
        }
        let (model, decoy) = self.model.extend_with_decoy(a, delta)?;
        // The front is unchanged by a decoy, so only the new gap is needed.
        let gap = model
            .pareto_front()
            .iter()
            .filter(|&p| model.prefers(p, decoy))
            .map(|p| model.gamma(p, decoy))
            .fold(f64::INFINITY, f64::min);
        self.model = model;
        self.gaps.push(gap);
        self.decoys.insert((a, delta.to_bits()), decoy);
        Ok(decoy)
    }
}

fn compute_gaps(model: &PosetModel) -> Vec<f64> {
    let front = model.pareto_front();
    (0..model.arm_count())
        .map(|i| {
            if front.contains(i) {
                0.0
            } else {
                front
                    .iter()
                    .filter(|&p| model.prefers(p, i))
                    .map(|p| model.gamma(p, i))
                    .fold(f64::INFINITY, f64::min)
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn two_plus_one() -> PosetModel {
        // a=0 ≻ b=1 with γ = 0.2; c=2 incomparable to both.
        PosetModel::new(3, [(0, 1)], [(0, 1, 0.2)]).unwrap()
    }

    #[test]
    fn gaps_follow_front_distance() {
        let env = DuelEnvironment::new(two_plus_one(), Observability::Partial, 1).unwrap();
        assert_eq!(env.arm_gap(0).unwrap(), 0.0);
        assert_eq!(env.arm_gap(1).unwrap(), 0.2);
        assert_eq!(env.arm_gap(2).unwrap(), 0.0);
        assert_eq!(env.regret_of_pair(0, 2).unwrap(), 0.0);
        assert_eq!(env.regret_of_pair(1, 2).unwrap(), 0.2);
        assert!(matches!(env.arm_gap(9), Err(Error::UnknownArm(9))));
    }

    #[test]
    fn gap_is_min_over_dominating_front_arms() {
        // 0 ≻ 2 (0.3), 1 ≻ 2 (0.1): gap of 2 is 0.1.
        let m = PosetModel::new(3, [(0, 2), (1, 2)], [(0, 2, 0.3), (1, 2, 0.1)]).unwrap();
        let env = DuelEnvironment::new(m, Observability::Partial, 0).unwrap();
        assert_eq!(env.arm_gap(2).unwrap(), 0.1);
    }

    #[test]
    fn rejects_bad_duels() {
        let mut env = DuelEnvironment::new(two_plus_one(), Observability::Partial, 1).unwrap();
        assert!(matches!(env.duel(0, 0), Err(Error::SameArm(0))));
        assert!(matches!(env.duel(0, 7), Err(Error::UnknownArm(7))));
        assert_eq!(env.duel_count(), 0);
    }

    #[test]
    fn strong_preference_wins_almost_always() {
        let m = PosetModel::new(2, [(0, 1)], [(0, 1, 0.49)]).unwrap();
        let mut env = DuelEnvironment::new(m, Observability::Partial, 42).unwrap();
        let wins = (0..10_000)
            .filter(|_| env.duel(0, 1).unwrap().winner == Some(0))
            .count();
        // Binomial(10000, 0.99): mean 9900, sd ≈ 10; 0.98 is 10 sd away.
        let rate = wins as f64 / 10_000.0;
        assert!((0.98..=1.0).contains(&rate), "rate {rate}");
    }

    #[test]
    fn incomparable_partial_is_fair_coin() {
        let mut env = DuelEnvironment::new(two_plus_one(), Observability::Partial, 7).unwrap();
        let wins = (0..10_000)
            .filter(|_| env.duel(0, 2).unwrap().winner == Some(0))
            .count();
        let rate = wins as f64 / 10_000.0;
        assert!((rate - 0.5).abs() <= 0.02, "rate {rate}");
    }

    #[test]
    fn incomparable_full_reports_flag() {
        let mut env = DuelEnvironment::new(two_plus_one(), Observability::Full, 7).unwrap();
        for _ in 0..100 {
            let out = env.duel(1, 2).unwrap();
            assert_eq!(out, DuelOutcome { winner: None, comparable: Some(false) });
        }
        assert_eq!(env.duel(0, 1).unwrap().comparable, Some(true));
        assert_eq!(env.duel_count(), 101);
        // Probes still accrue regret.
        assert!((env.regret() - 100.0 * 0.2 - 0.2).abs() < 1e-9);
    }

    #[test]
    fn regret_equals_replayed_log() {
        let mut env = DuelEnvironment::new(two_plus_one(), Observability::Partial, 3)
            .unwrap()
            .with_duel_log();
        let pairs = [(0, 1), (1, 2), (0, 2), (2, 1)];
        for t in 0..200 {
            let (i, j) = pairs[t % pairs.len()];
            env.duel(i, j).unwrap();
        }
        let mut replay = 0.0;
        for r in env.duel_log().unwrap() {
            replay += env.regret_of_pair(r.arm_i, r.arm_j).unwrap();
            assert_eq!(r.cumulative_regret, replay);
        }
        assert_eq!(replay, env.regret());
    }

    #[test]
    fn deterministic_under_seed() {
        let run = |seed| {
            let mut env = DuelEnvironment::new(two_plus_one(), Observability::Partial, seed).unwrap();
            (0..500).map(|_| env.duel(0, 2).unwrap().winner).collect::<Vec<_>>()
        };
        assert_eq!(run(11), run(11));
        assert_ne!(run(11), run(12));
    }

    #[test]
    fn decoys_are_reused_and_carry_gaps() {
        let mut env = DuelEnvironment::new(two_plus_one(), Observability::Partial, 1).unwrap();
        let d = env.decoy_of(1, 0.05).unwrap();
        assert_eq!(d, 3);
        assert_eq!(env.decoy_of(1, 0.05).unwrap(), d);
        assert!(env.is_decoy(d));
        // Front arm 0 ≻ 1' with max(0.2, 0.05).
        assert_eq!(env.arm_gap(d).unwrap(), 0.2);
        let d0 = env.decoy_of(0, 0.05).unwrap();
        assert_eq!(env.arm_gap(d0).unwrap(), 0.05);
        assert_eq!(env.base_arms().len(), 3);
        env.duel(0, d0).unwrap();
        assert!((env.regret() - 0.05).abs() < 1e-12);
        assert_eq!(env.base_regret(), 0.0);
    }

    #[test]
    fn duel_log_csv() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("log.csv");
        let mut env = DuelEnvironment::new(two_plus_one(), Observability::Full, 1)
            .unwrap()
            .with_duel_log();
        env.duel(0, 1).unwrap();
        env.duel(0, 2).unwrap();
        env.write_duel_log(&path).unwrap();
        let text = std::fs::read_to_string(path).unwrap();
        let mut lines = text.lines();
        assert_eq!(
            lines.next().unwrap(),
            "t,arm_i,arm_j,winner,comparable_flag,cumulative_regret"
        );
        assert!(lines.nth(1).unwrap().starts_with("2,0,2,,false,"));
    }
}
