//! SlicingBandits for fully observable posets.
//!
//! Each iteration extracts a maximal chain of the remaining arms, finds its
//! maximum with a pluggable [`ChainMax`] routine, and prunes every remaining
//! arm comparable to that maximum. Comparability is learned from single
//! probes that are memoized for the whole run.

use std::collections::HashMap;

use rand::seq::SliceRandom;

use crate::compare::{direct_compare, stopping_horizon, CompareOptions, StatsStore, Verdict};
use crate::env::{DuelSource, Observability};
use crate::error::{Error, Result};
use crate::poset::{Arm, ArmSet};
use crate::trace::{ChainRecord, RunTrace};

/// Comparability facts learned so far, plus the outcomes of the probes.
#[derive(Clone, Debug, Default)]
pub struct ComparabilityMemo {
    known: HashMap<(Arm, Arm), bool>,
    probes: u64,
    /// Winners of comparable probes, reusable as duel evidence.
    pub store: StatsStore,
}

impl ComparabilityMemo {
    pub fn new() -> Self {
        Self::default()
    }

    /// Duels spent on probing.
    pub fn probes(&self) -> u64 {
        self.probes
    }

    /// Whether `a` and `b` are comparable, probing once if unknown.
    pub fn comparable<E: DuelSource + ?Sized>(&mut self, env: &mut E, a: Arm, b: Arm) -> Result<bool> {
        let key = (a.min(b), a.max(b));
        if let Some(&c) = self.known.get(&key) {
            return Ok(c);
        }
        let out = env.duel(a, b)?;
        self.probes += 1;
        let comparable = out.comparable.ok_or_else(|| {
            Error::Mode("comparability probes need full observability".into())
        })?;
        if let Some(w) = out.winner {
            self.store.record(a, b, w == a);
        }
        self.known.insert(key, comparable);
        Ok(comparable)
    }
}

fn require_full<E: DuelSource + ?Sized>(env: &E) -> Result<()> {
    if env.observability() == Observability::Full {
        Ok(())
    } else {
        Err(Error::Mode("SlicingBandits needs full observability".into()))
    }
}

/// A maximal chain of `remaining`, in the order its members were added.
///
/// Candidates are scanned once in shuffled order; the first becomes the seed
/// of the chain and every later one joins if it is comparable with all
/// current members.
pub fn extract_maximal_chain<E: DuelSource + ?Sized>(
    env: &mut E,
    memo: &mut ComparabilityMemo,
    remaining: &ArmSet,
) -> Result<Vec<Arm>> {
    require_full(env)?;
    if remaining.is_empty() {
        return Err(Error::EmptySet);
    }
    let mut order = remaining.to_vec();
    order.shuffle(env.rng());
    let mut chain = vec![order[0]];
    for &q in &order[1..] {
        let mut fits = true;
        for &c in &chain {
            if !memo.comparable(env, q, c)? {
                fits = false;
                break;
            }
        }
        if fits {
            chain.push(q);
        }
    }
    Ok(chain)
}

/// Finds the maximum of a totally ordered set of arms.
pub trait ChainMax {
    fn chain_max(&self, env: &mut dyn DuelSource, store: &mut StatsStore, chain: &[Arm], delta: f64) -> Result<Arm>;

    /// Nominal duel count on a chain of `len` arms with uniform gap `gap`.
    fn nominal_budget(&self, len: usize, delta: f64, gap: f64) -> Result<u64>;
}

/// Sequential knockout: the champion duels each next member at confidence
/// `delta / |chain|` and the winner advances.
#[derive(Clone, Copy, Debug, Default)]
pub struct KnockoutChainMax {
    pub opts: CompareOptions,
}

impl ChainMax for KnockoutChainMax {
    fn chain_max(&self, env: &mut dyn DuelSource, store: &mut StatsStore, chain: &[Arm], delta: f64) -> Result<Arm> {
        default_chain_max(env, store, chain, delta, self.opts)
    }

    fn nominal_budget(&self, len: usize, delta: f64, gap: f64) -> Result<u64> {
        if len <= 1 {
            return Ok(0);
        }
        Ok((len as u64 - 1) * stopping_horizon(gap, delta / len as f64)?)
    }
}

/// The knockout chain maximum.
pub fn default_chain_max<E: DuelSource + ?Sized>(
    env: &mut E,
    store: &mut StatsStore,
    chain: &[Arm],
    delta: f64,
    opts: CompareOptions,
) -> Result<Arm> {
    let (&first, rest) = chain.split_first().ok_or(Error::EmptySet)?;
    let per_duel = delta / chain.len() as f64;
    let mut champion = first;
    for &next in rest {
        match direct_compare(env, store, champion, next, 0.0, per_duel, opts)? {
            Verdict::FirstBeatsSecond => {}
            Verdict::SecondBeatsFirst => champion = next,
            v => {
                return Err(Error::InvalidParameter(format!(
                    "chain members {champion} and {next} are not ordered ({v:?})"
                )))
            }
        }
    }
    Ok(champion)
}

/// Confidence handed to the chain maximum of each iteration.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ChainConfidence {
    /// `δ·|C| / K`.
    #[default]
    Proportional,
    /// `δ / K` for every chain.
    Uniform,
}

/// Runs SlicingBandits over all base arms of `env`.
pub fn slicing_bandits<E: DuelSource>(
    env: &mut E,
    delta: f64,
    chain_max: &dyn ChainMax,
    confidence: ChainConfidence,
) -> Result<(ArmSet, RunTrace)> {
    require_full(env)?;
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::InvalidParameter(format!("δ must lie in (0, 1), got {delta}")));
    }
    let mut remaining = env.base_arms();
    let k = remaining.len();
    if k == 0 {
        return Err(Error::EmptySet);
    }
    let mut trace = RunTrace::new("slicing", k);
    let mut memo = ComparabilityMemo::new();
    let mut front = ArmSet::new();
    let (d0, r0) = (env.duel_count(), env.regret());

    while !remaining.is_empty() {
        let probes_before = memo.probes();
        let chain = extract_maximal_chain(env, &mut memo, &remaining)?;
        for &c in &chain {
            remaining.remove(c);
        }
        let chain_delta = match confidence {
            ChainConfidence::Proportional => delta * chain.len() as f64 / k as f64,
            ChainConfidence::Uniform => delta / k as f64,
        };
        let before = env.duel_count();
        let top = chain_max.chain_max(env, &mut memo.store, &chain, chain_delta)?;
        let chain_max_duels = env.duel_count() - before;
        front.insert(top);
        let mut pruned = 0;
        for q in remaining.to_vec() {
            if memo.comparable(env, top, q)? {
                remaining.remove(q);
                pruned += 1;
            }
        }
        trace.chains.push(ChainRecord {
            iteration: trace.chains.len() + 1,
            chain,
            chain_max: top,
            chain_max_duels,
            probe_duels: memo.probes() - probes_before,
            pruned,
        });
    }

    trace.front = front.clone();
    trace.probe_duels = memo.probes();
    trace.total_duels = env.duel_count() - d0;
    trace.total_regret = env.regret() - r0;
    Ok((front, trace))
}
