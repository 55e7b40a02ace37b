//! Uniform-sampling baseline in the style of successive elimination.
//!
//! Every active pair is dueled once per sweep. An arm is dropped as soon as
//! some active arm confidently beats it. Once every surviving pair looks
//! closer than Δ to a fair coin, the survivors are resolved with decoys.

use crate::compare::{decoy_compare, CompareOptions, StatsStore, Verdict};
use crate::env::{DuelSource, Observability};
use crate::error::{Error, Result};
use crate::poset::{Arm, ArmSet};
use crate::trace::{EpochKind, EpochRecord, RunTrace, VerdictLog};

/// Runs the baseline over all base arms of `env`.
pub fn uniform_sampling<E: DuelSource + ?Sized>(
    env: &mut E,
    delta_gap: f64,
    delta: f64,
    opts: CompareOptions,
) -> Result<(ArmSet, RunTrace)> {
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::InvalidParameter(format!("δ must lie in (0, 1), got {delta}")));
    }
    if !(delta_gap > 0.0 && delta_gap < 0.5) {
        return Err(Error::InvalidParameter(format!("decoy gap must lie in (0, 0.5), got {delta_gap}")));
    }
    if env.observability() == Observability::Full {
        return Err(Error::Mode("uniform sampling expects partial observability".into()));
    }
    let arms = env.base_arms();
    if arms.is_empty() {
        return Err(Error::EmptySet);
    }
    let k = arms.len();
    let mut trace = RunTrace::new("uniform", k);
    let pair_delta = delta / (k * k) as f64;
    let mut store = StatsStore::new();
    let mut active = arms.to_vec();
    let (d0, r0) = (env.duel_count(), env.regret());
    let mut sweeps = 0usize;

    while active.len() > 1 {
        for x in 0..active.len() {
            for y in x + 1..active.len() {
                let (i, j) = (active[x], active[y]);
                let out = env.duel(i, j)?;
                if let Some(w) = out.winner {
                    store.record(i, j, w == i);
                }
            }
        }
        sweeps += 1;
        let beaten: Vec<Arm> = active
            .iter()
            .copied()
            .filter(|&i| {
                active.iter().any(|&j| {
                    let s = store.get(i, j);
                    j != i && s.total > 0 && s.interval(pair_delta).1 < 0.5
                })
            })
            .collect();
        active.retain(|a| !beaten.contains(a));
        let settled = active.iter().enumerate().all(|(x, &i)| {
            active[x + 1..].iter().all(|&j| {
                let (lo, hi) = store.get(i, j).interval(pair_delta);
                lo > 0.5 - delta_gap && hi < 0.5 + delta_gap
            })
        });
        if settled {
            break;
        }
    }
    trace.epochs.push(EpochRecord {
        epoch: sweeps,
        eps: delta_gap,
        kind: EpochKind::Sweep,
        input_size: k,
        survivors: active.iter().copied().collect(),
        duels: env.duel_count() - d0,
        regret: env.regret() - r0,
        call_delta: pair_delta,
    });
    trace.peeling_duels = env.duel_count() - d0;
    trace.peeling_regret = env.regret() - r0;

    let (d1, r1, b1) = (env.duel_count(), env.regret(), env.base_regret());
    let mut log = VerdictLog::new();
    let mut lost = vec![false; active.len()];
    for x in 0..active.len() {
        for y in x + 1..active.len() {
            let v = decoy_compare(env, active[x], active[y], delta_gap, pair_delta, opts)?;
            log.push(active[x], active[y], &v);
            match v {
                Verdict::FirstBeatsSecond => lost[y] = true,
                Verdict::SecondBeatsFirst => lost[x] = true,
                _ => {}
            }
        }
    }
    let front: ArmSet = active
        .iter()
        .zip(&lost)
        .filter(|(_, &l)| !l)
        .map(|(&a, _)| a)
        .collect();
    trace.epochs.push(EpochRecord {
        epoch: sweeps + 1,
        eps: delta_gap,
        kind: EpochKind::Decoy,
        input_size: active.len(),
        survivors: front.clone(),
        duels: env.duel_count() - d1,
        regret: env.regret() - r1,
        call_delta: pair_delta,
    });
    trace.decoy_duels = env.duel_count() - d1;
    trace.decoy_regret = env.regret() - r1;
    trace.decoy_regret_base = env.base_regret() - b1;
    trace.front = front.clone();
    trace.total_duels = env.duel_count() - d0;
    trace.total_regret = env.regret() - r0;
    trace.verdicts = log.count();
    trace.verdict_digest = log.digest();
    Ok((front, trace))
}
