//! Statistical pairwise tests between arms.
//!
//! [`direct_compare`] duels two arms until it can either order them or
//! declare them ε-indistinguishable. [`decoy_compare`] resolves exact
//! (in)comparability by dueling each arm against the other's Δ-decoy.
//! Both use Hoeffding intervals; by default the anytime radius
//! [`confidence_radius`] so that evidence accumulated by earlier calls can be
//! reused through a [`StatsStore`].

use std::collections::HashMap;

use log::warn;
use serde::{Deserialize, Serialize};

use crate::env::DuelSource;
use crate::error::{Error, Result};
use crate::poset::Arm;

/// Anytime Hoeffding half-width `sqrt(ln(2n(n+1)/δ) / 2n)`.
///
/// The union bound `Σ_n δ/(n(n+1)) = δ` makes the interval `p̂_n ± r(n, δ)`
/// hold simultaneously for every `n` with probability at least `1 − δ`.
pub fn confidence_radius(n: u64, delta: f64) -> Result<f64> {
    if n == 0 {
        return Err(Error::InvalidParameter("radius needs at least one sample".into()));
    }
    check_probability(delta)?;
    Ok(radius(n, delta))
}

#[inline]
fn radius(n: u64, delta: f64) -> f64 {
    let n = n as f64;
    ((2.0 * n * (n + 1.0) / delta).ln() / (2.0 * n)).sqrt()
}

/// Smallest `n ≥ 1` with `r(n, δ) < threshold`.
///
/// `r` is strictly decreasing from `n = 2` on, so this is found by doubling
/// followed by bisection.
pub fn stopping_horizon(threshold: f64, delta: f64) -> Result<u64> {
    check_probability(delta)?;
    if threshold.is_nan() || threshold <= 0.0 {
        return Err(Error::InvalidParameter(format!("threshold must be > 0, got {threshold}")));
    }
    if radius(1, delta) < threshold {
        return Ok(1);
    }
    let mut hi = 2u64;
    while radius(hi, delta) >= threshold {
        hi *= 2;
    }
    let mut lo = hi / 2;
    while hi - lo > 1 {
        let mid = lo + (hi - lo) / 2;
        if radius(mid, delta) < threshold {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(hi)
}

fn check_probability(delta: f64) -> Result<()> {
    if delta > 0.0 && delta < 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("confidence δ must lie in (0, 1), got {delta}")))
    }
}

/// Duel tallies for one ordered view of a pair.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct PairStats {
    pub wins_first: u64,
    pub total: u64,
}

impl PairStats {
    pub fn p_hat(&self) -> Option<f64> {
        (self.total > 0).then(|| self.wins_first as f64 / self.total as f64)
    }

    pub fn radius(&self, delta: f64) -> f64 {
        if self.total == 0 {
            f64::INFINITY
        } else {
            radius(self.total, delta)
        }
    }

    /// `[p̂ − r, p̂ + r]`; the whole real line before any duel.
    pub fn interval(&self, delta: f64) -> (f64, f64) {
        match self.p_hat() {
            None => (f64::NEG_INFINITY, f64::INFINITY),
            Some(p) => {
                let r = self.radius(delta);
                (p - r, p + r)
            }
        }
    }

    fn mirrored(self) -> Self {
        PairStats {
            wins_first: self.total - self.wins_first,
            total: self.total,
        }
    }

    fn push(&mut self, first_won: bool) {
        self.total += 1;
        if first_won {
            self.wins_first += 1;
        }
    }
}

fn contains(interval: (f64, f64), x: f64) -> bool {
    interval.0 <= x && x <= interval.1
}

/// Evidence shared across comparisons, keyed by unordered pair.
#[derive(Clone, Debug, Default)]
pub struct StatsStore {
    pairs: HashMap<(Arm, Arm), PairStats>,
}

impl StatsStore {
    pub fn new() -> Self {
        Self::default()
    }

    /// Tallies oriented so that `wins_first` counts wins of `a`.
    pub fn get(&self, a: Arm, b: Arm) -> PairStats {
        let s = self.pairs.get(&key(a, b)).copied().unwrap_or_default();
        if a <= b {
            s
        } else {
            s.mirrored()
        }
    }

    pub fn record(&mut self, a: Arm, b: Arm, a_won: bool) {
        let first_won = if a <= b { a_won } else { !a_won };
        self.pairs.entry(key(a, b)).or_default().push(first_won);
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    /// All recorded pairs `(a, b, stats)` with `a < b`, sorted.
    pub fn pairs(&self) -> Vec<(Arm, Arm, PairStats)> {
        let mut v: Vec<_> = self.pairs.iter().map(|(&(a, b), &s)| (a, b, s)).collect();
        v.sort_by_key(|&(a, b, _)| (a, b));
        v
    }
}

fn key(a: Arm, b: Arm) -> (Arm, Arm) {
    (a.min(b), a.max(b))
}

/// Outcome of a pairwise test, read as "first argument vs second".
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    FirstBeatsSecond,
    SecondBeatsFirst,
    IndistinguishableAt(f64),
    Incomparable,
}

impl Verdict {
    pub fn is_order(&self) -> bool {
        matches!(self, Verdict::FirstBeatsSecond | Verdict::SecondBeatsFirst)
    }
}

/// How confidence intervals are formed.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConfidenceMode {
    /// Sequential test on the anytime radius; reuses stored evidence.
    #[default]
    Anytime,
    /// Draw a precomputed Hoeffding sample size, then decide once.
    FixedBudget,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CompareOptions {
    #[serde(default)]
    pub confidence: ConfidenceMode,
    /// Abort a single call after this many duels.
    #[serde(default)]
    pub max_duels: Option<u64>,
}

struct DuelBudget {
    used: u64,
    cap: Option<u64>,
}

impl DuelBudget {
    fn new(cap: Option<u64>) -> Self {
        DuelBudget { used: 0, cap }
    }

    fn spend(&mut self) -> Result<()> {
        if self.cap.is_some_and(|c| self.used >= c) {
            return Err(Error::BudgetExhausted { duels: self.used });
        }
        self.used += 1;
        Ok(())
    }
}

/// Hoeffding sample size for the fixed-budget direct test at precision `eps`.
pub fn fixed_direct_budget(eps: f64, delta: f64) -> u64 {
    (2.0 * (2.0 / delta).ln() / (eps * eps)).ceil() as u64
}

/// Per-stream Hoeffding sample size for the fixed-budget decoy test.
pub fn fixed_decoy_budget(delta_gap: f64, delta: f64) -> u64 {
    (2.0 * (2.0 / delta).ln() / (delta_gap * delta_gap)).ceil() as u64
}

/// Compares `a` and `b` directly at precision `eps` and confidence `1 − delta`.
///
/// Keeps dueling while `0.5 + eps` or `0.5 − eps` lies in the interval and
/// returns an order as soon as `0.5` leaves it; once both `0.5 ± eps` are
/// excluded the pair is declared ε-indistinguishable. Prior tallies for the
/// pair in `store` are used as the starting point and every new duel is
/// recorded there. With `eps = 0` only an order can end the loop.
///
/// Under full observability an incomparable probe ends the test with
/// [`Verdict::Incomparable`]. A source without a common evaluator for the
/// pair yields [`Verdict::IndistinguishableAt`] with no duels.
pub fn direct_compare<E: DuelSource + ?Sized>(
    env: &mut E,
    store: &mut StatsStore,
    a: Arm,
    b: Arm,
    eps: f64,
    delta: f64,
    opts: CompareOptions,
) -> Result<Verdict> {
    if a == b {
        return Err(Error::SameArm(a));
    }
    check_probability(delta)?;
    if eps.is_nan() || eps < 0.0 {
        return Err(Error::InvalidParameter(format!("eps must be ≥ 0, got {eps}")));
    }
    let mut budget = DuelBudget::new(opts.max_duels);
    match opts.confidence {
        ConfidenceMode::Anytime => loop {
            let stats = store.get(a, b);
            if let Some(p) = stats.p_hat() {
                let iv = stats.interval(delta);
                if !contains(iv, 0.5) {
                    return Ok(order_from(p));
                }
                if !contains(iv, 0.5 + eps) && !contains(iv, 0.5 - eps) {
                    return Ok(Verdict::IndistinguishableAt(eps));
                }
            }
            budget.spend()?;
            match duel_once(env, store, a, b)? {
                DirectStep::Recorded => {}
                DirectStep::Finished(v) => return Ok(v.with_eps(eps)),
            }
        },
        ConfidenceMode::FixedBudget => {
            if eps <= 0.0 {
                return Err(Error::InvalidParameter(
                    "fixed-budget direct comparison needs eps > 0".into(),
                ));
            }
            let needed = fixed_direct_budget(eps, delta);
            while store.get(a, b).total < needed {
                budget.spend()?;
                if let DirectStep::Finished(v) = duel_once(env, store, a, b)? {
                    return Ok(v.with_eps(eps));
                }
            }
            let p = store.get(a, b).p_hat().unwrap_or(0.5);
            Ok(if (p - 0.5).abs() > eps / 2.0 {
                order_from(p)
            } else {
                Verdict::IndistinguishableAt(eps)
            })
        }
    }
}

enum DirectStep {
    Recorded,
    Finished(Verdict),
}

impl Verdict {
    fn with_eps(self, eps: f64) -> Verdict {
        match self {
            Verdict::IndistinguishableAt(_) => Verdict::IndistinguishableAt(eps),
            v => v,
        }
    }
}

fn duel_once<E: DuelSource + ?Sized>(
    env: &mut E,
    store: &mut StatsStore,
    a: Arm,
    b: Arm,
) -> Result<DirectStep> {
    match env.duel(a, b) {
        Ok(out) => match out.winner {
            Some(w) => {
                store.record(a, b, w == a);
                Ok(DirectStep::Recorded)
            }
            None => Ok(DirectStep::Finished(Verdict::Incomparable)),
        },
        Err(Error::NoCommonEvaluator(i, j)) => {
            warn!("no common evaluator for {i} and {j}; treating as indistinguishable");
            Ok(DirectStep::Finished(Verdict::IndistinguishableAt(0.0)))
        }
        Err(e) => Err(e),
    }
}

fn order_from(p: f64) -> Verdict {
    if p > 0.5 {
        Verdict::FirstBeatsSecond
    } else {
        Verdict::SecondBeatsFirst
    }
}

/// Resolves whether `a` and `b` are comparable using Δ-decoys `a'`, `b'`.
///
/// Each round duels `(a, b')` and `(b, a')` on fresh tallies held at
/// confidence `1 − delta/2` each. `a ≻ b` is returned once `0.5` leaves the
/// `(a, b')` interval from below, `b ≻ a` symmetrically (the `(a, b')` test is
/// checked first), and [`Verdict::Incomparable`] once both intervals lie
/// entirely below `0.5 + Δ`.
pub fn decoy_compare<E: DuelSource + ?Sized>(
    env: &mut E,
    a: Arm,
    b: Arm,
    delta_gap: f64,
    delta: f64,
    opts: CompareOptions,
) -> Result<Verdict> {
    if a == b {
        return Err(Error::SameArm(a));
    }
    check_probability(delta)?;
    if !(delta_gap > 0.0 && delta_gap < 0.5) {
        return Err(Error::InvalidParameter(format!(
            "decoy gap must lie in (0, 1/2), got {delta_gap}"
        )));
    }
    let a_decoy = env.decoy_of(a, delta_gap)?;
    let b_decoy = env.decoy_of(b, delta_gap)?;
    let mut a_vs_bd = PairStats::default();
    let mut b_vs_ad = PairStats::default();
    let mut budget = DuelBudget::new(opts.max_duels);
    let mut round = |env: &mut E, a_vs_bd: &mut PairStats, b_vs_ad: &mut PairStats| -> Result<()> {
        budget.spend()?;
        let w = env.duel(a, b_decoy)?.winner;
        a_vs_bd.push(w == Some(a));
        budget.spend()?;
        let w = env.duel(b, a_decoy)?.winner;
        b_vs_ad.push(w == Some(b));
        Ok(())
    };
    match opts.confidence {
        ConfidenceMode::Anytime => {
            let half = delta / 2.0;
            let target = 0.5 + delta_gap;
            loop {
                round(env, &mut a_vs_bd, &mut b_vs_ad)?;
                let ia = a_vs_bd.interval(half);
                let ib = b_vs_ad.interval(half);
                if !contains(ia, 0.5) && a_vs_bd.p_hat() > Some(0.5) {
                    return Ok(Verdict::FirstBeatsSecond);
                }
                if !contains(ib, 0.5) && b_vs_ad.p_hat() > Some(0.5) {
                    return Ok(Verdict::SecondBeatsFirst);
                }
                if ia.1 < target && ib.1 < target {
                    return Ok(Verdict::Incomparable);
                }
            }
        }
        ConfidenceMode::FixedBudget => {
            let n = fixed_decoy_budget(delta_gap, delta);
            for _ in 0..n {
                round(env, &mut a_vs_bd, &mut b_vs_ad)?;
            }
            let threshold = 0.5 + delta_gap / 2.0;
            Ok(if a_vs_bd.p_hat().unwrap_or(0.0) > threshold {
                Verdict::FirstBeatsSecond
            } else if b_vs_ad.p_hat().unwrap_or(0.0) > threshold {
                Verdict::SecondBeatsFirst
            } else {
                Verdict::Incomparable
            })
        }
    }
}
