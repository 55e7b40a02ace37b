//! The UBS routine and UnchainedBandits.
//!
//! UnchainedBandits peels the arm set with direct comparisons at shrinking
//! precision `ε_t = ε_0·rate^t` and finishes with one decoy-based pass that
//! recovers the exact Pareto front. Direct-comparison evidence is shared
//! across epochs through a [`StatsStore`].

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::compare::{decoy_compare, direct_compare, CompareOptions, ConfidenceMode, StatsStore, Verdict};
use crate::env::DuelSource;
use crate::error::{Error, Result};
use crate::poset::{Arm, ArmSet};
use crate::trace::{EpochKind, EpochRecord, RunTrace, VerdictLog};

/// What UnchainedBandits returns.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PeelingMode {
    /// Peeling followed by a decoy epoch; returns the Pareto front.
    Exact,
    /// Peeling only; returns an `eps`-approximation of the front.
    EpsApprox { eps: f64 },
}

/// Configuration of an UnchainedBandits run.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PeelingSchedule {
    pub eps0: f64,
    pub rate: f64,
    /// `N`: the run has `N − 1` peeling epochs (plus the decoy epoch in
    /// exact mode).
    pub epochs: usize,
    /// Decoy gap Δ.
    pub delta_gap: f64,
    /// Global confidence δ.
    pub delta: f64,
    pub mode: PeelingMode,
    #[serde(default)]
    pub confidence: ConfidenceMode,
}

pub const DEFAULT_EPS0: f64 = 0.5;
pub const DEFAULT_RATE: f64 = 0.9;

/// Smallest `N ≥ 1` with `eps0·rate^(N−1) ≤ target`.
pub fn auto_epochs(eps0: f64, rate: f64, target: f64) -> usize {
    let at = |m: usize| eps0 * rate.powi(m as i32);
    let mut m = ((target / eps0).ln() / rate.ln()).ceil().max(0.0) as usize;
    // Guard the ceiling against rounding on either side of an integer.
    while m > 0 && at(m - 1) <= target {
        m -= 1;
    }
    while at(m) > target {
        m += 1;
    }
    m + 1
}

impl PeelingSchedule {
    /// Exact mode with default ε_0 and rate, and `N` chosen so that the last
    /// peeling precision is the first below `Δ·√K`.
    pub fn exact(k: usize, delta_gap: f64, delta: f64) -> Self {
        Self::exact_with(k, DEFAULT_EPS0, DEFAULT_RATE, delta_gap, delta)
    }

    pub fn exact_with(k: usize, eps0: f64, rate: f64, delta_gap: f64, delta: f64) -> Self {
        let target = delta_gap * (k.max(1) as f64).sqrt();
        PeelingSchedule {
            eps0,
            rate,
            epochs: auto_epochs(eps0, rate, target),
            delta_gap,
            delta,
            mode: PeelingMode::Exact,
            confidence: ConfidenceMode::Anytime,
        }
    }

    /// Decoy-free mode ending at the first precision below `eps`.
    pub fn eps_approx(eps: f64, delta: f64) -> Self {
        Self::eps_approx_with(eps, DEFAULT_EPS0, DEFAULT_RATE, delta)
    }

    pub fn eps_approx_with(eps: f64, eps0: f64, rate: f64, delta: f64) -> Self {
        PeelingSchedule {
            eps0,
            rate,
            epochs: auto_epochs(eps0, rate, eps),
            delta_gap: eps,
            delta,
            mode: PeelingMode::EpsApprox { eps },
            confidence: ConfidenceMode::Anytime,
        }
    }

    /// `ε_t = ε_0·rate^t`.
    pub fn eps(&self, t: usize) -> f64 {
        self.eps0 * self.rate.powi(t as i32)
    }

    pub fn peeling_epochs(&self) -> usize {
        self.epochs.saturating_sub(1)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidParameter(m));
        if !(self.eps0 > 0.0 && self.eps0 <= 0.5) {
            return bad(format!("eps0 must lie in (0, 0.5], got {}", self.eps0));
        }
        if !(self.rate > 0.0 && self.rate < 1.0) {
            return bad(format!("peeling rate must lie in (0, 1), got {}", self.rate));
        }
        if self.epochs == 0 {
            return bad("epoch count must be at least 1".into());
        }
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return bad(format!("δ must lie in (0, 1), got {}", self.delta));
        }
        match self.mode {
            PeelingMode::Exact => {
                if !(self.delta_gap > 0.0 && self.delta_gap < 0.5) {
                    return bad(format!("decoy gap must lie in (0, 0.5), got {}", self.delta_gap));
                }
            }
            PeelingMode::EpsApprox { eps } => {
                if !(eps > 0.0 && eps < 0.5) {
                    return bad(format!("target ε must lie in (0, 0.5), got {eps}"));
                }
            }
        }
        Ok(())
    }
}

/// How the UBS routine compares a candidate with a pivot.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Comparer {
    Direct,
    Decoy { delta_gap: f64 },
}

/// Hooks for instrumented replays of the UBS routine.
pub trait UbsObserver {
    /// Called after every comparison of `candidate` with `pivot`.
    fn on_verdict(&mut self, _candidate: Arm, _pivot: Arm, _verdict: &Verdict) {}

    /// Called once per examined arm, after the pivot set is updated.
    fn on_step(&mut self, _examined: &[Arm], _pivots: &[Arm]) {}
}

impl UbsObserver for () {}

impl UbsObserver for VerdictLog {
    fn on_verdict(&mut self, candidate: Arm, pivot: Arm, verdict: &Verdict) {
        self.push(candidate, pivot, verdict);
    }
}

/// Builds a pivot set over `s`.
///
/// Candidates are examined in a shuffled order; the first one becomes the
/// initial pivot. Each later candidate is compared with every current pivot
/// at confidence `delta_prime / |s|²`; pivots it beats are dropped, and it
/// joins the pivot set unless some pivot beat it.
#[allow(clippy::too_many_arguments)]
pub fn ubs_routine<E: DuelSource + ?Sized>(
    env: &mut E,
    store: &mut StatsStore,
    s: &ArmSet,
    eps: f64,
    delta_prime: f64,
    comparer: Comparer,
    opts: CompareOptions,
    observer: &mut dyn UbsObserver,
) -> Result<ArmSet> {
    if s.is_empty() {
        return Err(Error::EmptySet);
    }
    let mut order = s.to_vec();
    order.shuffle(env.rng());
    let n = order.len() as f64;
    let call_delta = delta_prime / (n * n);
    let mut pivots = vec![order[0]];
    observer.on_step(&order[..1], &pivots);
    for idx in 1..order.len() {
        let c = order[idx];
        let mut beaten = false;
        let mut kept = Vec::with_capacity(pivots.len() + 1);
        for &p in &pivots {
            let v = match comparer {
                Comparer::Direct => direct_compare(env, store, c, p, eps, call_delta, opts)?,
                Comparer::Decoy { delta_gap } => decoy_compare(env, c, p, delta_gap, call_delta, opts)?,
            };
            observer.on_verdict(c, p, &v);
            match v {
                Verdict::FirstBeatsSecond => {}
                Verdict::SecondBeatsFirst => {
                    beaten = true;
                    kept.push(p);
                }
                _ => kept.push(p),
            }
        }
        if !beaten {
            kept.push(c);
        }
        pivots = kept;
        observer.on_step(&order[..=idx], &pivots);
    }
    Ok(pivots.into_iter().collect())
}

/// Runs UnchainedBandits over all base arms of `env`.
pub fn unchained_bandits<E: DuelSource + ?Sized>(
    env: &mut E,
    schedule: &PeelingSchedule,
) -> Result<(ArmSet, RunTrace)> {
    unchained_bandits_observed(env, schedule, &mut ())
}

/// [`unchained_bandits`] with an observer attached to every UBS call.
pub fn unchained_bandits_observed<E: DuelSource + ?Sized>(
    env: &mut E,
    schedule: &PeelingSchedule,
    observer: &mut dyn UbsObserver,
) -> Result<(ArmSet, RunTrace)> {
    schedule.validate()?;
    if schedule.mode == PeelingMode::Exact && !env.supports_decoys() {
        return Err(Error::Mode("exact mode needs a duel source that supports decoys".into()));
    }
    let arms = env.base_arms();
    let mut trace = RunTrace::new("unchained", arms.len());
    trace.schedule = Some(*schedule);
    if arms.is_empty() {
        return Err(Error::EmptySet);
    }
    let opts = CompareOptions {
        confidence: schedule.confidence,
        max_duels: None,
    };
    let delta_prime = schedule.delta / schedule.epochs as f64;
    let mut log = Tee {
        log: VerdictLog::new(),
        inner: observer,
    };
    let mut store = StatsStore::new();
    let mut current = arms;
    let start_duels = env.duel_count();
    let start_regret = env.regret();

    for t in 1..schedule.epochs {
        let eps = schedule.eps(t);
        let (d0, r0) = (env.duel_count(), env.regret());
        let next = ubs_routine(env, &mut store, &current, eps, delta_prime, Comparer::Direct, opts, &mut log)?;
        trace.epochs.push(EpochRecord {
            epoch: t,
            eps,
            kind: EpochKind::Direct,
            input_size: current.len(),
            survivors: next.clone(),
            duels: env.duel_count() - d0,
            regret: env.regret() - r0,
            call_delta: delta_prime / (current.len() as f64).powi(2),
        });
        current = next;
    }
    trace.peeling_duels = env.duel_count() - start_duels;
    trace.peeling_regret = env.regret() - start_regret;

    if schedule.mode == PeelingMode::Exact {
        let (d0, r0, b0) = (env.duel_count(), env.regret(), env.base_regret());
        let comparer = Comparer::Decoy {
            delta_gap: schedule.delta_gap,
        };
        let front = ubs_routine(env, &mut store, &current, schedule.delta_gap, delta_prime, comparer, opts, &mut log)?;
        trace.epochs.push(EpochRecord {
            epoch: schedule.epochs,
            eps: schedule.delta_gap,
            kind: EpochKind::Decoy,
            input_size: current.len(),
            survivors: front.clone(),
            duels: env.duel_count() - d0,
            regret: env.regret() - r0,
            call_delta: delta_prime / (current.len() as f64).powi(2),
        });
        trace.decoy_duels = env.duel_count() - d0;
        trace.decoy_regret = env.regret() - r0;
        trace.decoy_regret_base = env.base_regret() - b0;
        current = front;
    }

    trace.front = current.clone();
    trace.total_duels = env.duel_count() - start_duels;
    trace.total_regret = env.regret() - start_regret;
    trace.verdicts = log.log.count();
    trace.verdict_digest = log.log.digest();
    Ok((current, trace))
}

struct Tee<'a> {
    log: VerdictLog,
    inner: &'a mut dyn UbsObserver,
}

impl UbsObserver for Tee<'_> {
    fn on_verdict(&mut self, candidate: Arm, pivot: Arm, verdict: &Verdict) {
        self.log.push(candidate, pivot, verdict);
        self.inner.on_verdict(candidate, pivot, verdict);
    }

    fn on_step(&mut self, examined: &[Arm], pivots: &[Arm]) {
        self.inner.on_step(examined, pivots);
    }
}

/// Trace-based surrogate for the peeling efficiency α: the largest
/// `(|S_{t+1}| / K)^(1/t)` over peeling epochs `t`.
pub fn estimate_alpha(trace: &RunTrace, k: usize) -> Result<f64> {
    if k == 0 {
        return Err(Error::InvalidParameter("arm count must be positive".into()));
    }
    let alpha = trace
        .epochs
        .iter()
        .filter(|e| e.kind == EpochKind::Direct && e.epoch >= 1)
        .map(|e| (e.survivors.len() as f64 / k as f64).powf(1.0 / e.epoch as f64))
        .fold(None, |acc: Option<f64>, x| Some(acc.map_or(x, |a| a.max(x))));
    alpha.ok_or_else(|| Error::InvalidParameter("trace has no peeling epoch".into()))
}
