//! Sample-budget and regret-bound calculators, plus brute-force references.

use serde::{Deserialize, Serialize};

use crate::env::DuelEnvironment;
use crate::error::{Error, Result};
use crate::poset::{ArmSet, PosetModel};
use crate::trace::{EpochKind, RunTrace};
use crate::unchained::{estimate_alpha, PeelingMode, PeelingSchedule};
use crate::Observability;

/// Per-epoch terms of the explicit duel budget.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BudgetBreakdown {
    pub peeling_terms: Vec<f64>,
    /// `ε_t`-widths of the epoch inputs used in the peeling terms.
    pub eps_widths: Vec<usize>,
    pub decoy_term: f64,
    pub total: f64,
}

/// Explicit duel budget of an UnchainedBandits run.
///
/// Sums `2|S_t|·w_{ε_t}(S_t)·ln(2N|S_t|²/δ)·(1/ε_t² − [t>1]/ε_{t−1}²)` over
/// the peeling epochs and `4|S_N|·w(S_N)·ln(4N|S_N|²/δ)/Δ²` for the decoy
/// epoch, using the set sizes recorded in the trace and ground-truth widths.
pub fn sample_budget(model: &PosetModel, schedule: &PeelingSchedule, trace: &RunTrace, cap: usize) -> Result<BudgetBreakdown> {
    let n = schedule.epochs as f64;
    let delta = schedule.delta;
    let mut peeling_terms = Vec::new();
    let mut eps_widths = Vec::new();
    let mut input = model.arms();
    let mut peeling = 0;
    for e in &trace.epochs {
        check_subset(model, &e.survivors)?;
        match e.kind {
            EpochKind::Direct => {
                peeling += 1;
                if e.epoch != peeling || e.input_size != input.len() {
                    return Err(Error::InvalidParameter(format!("trace epoch {} does not match the model", e.epoch)));
                }
                let t = e.epoch;
                let eps = schedule.eps(t);
                let s = input.len() as f64;
                let w = model.eps_width_of(&input, eps, cap)?;
                let prev = if t > 1 { 1.0 / schedule.eps(t - 1).powi(2) } else { 0.0 };
                peeling_terms.push(2.0 * s * w as f64 * (2.0 * n * s * s / delta).ln() * (1.0 / (eps * eps) - prev));
                eps_widths.push(w);
                input = e.survivors.clone();
            }
            EpochKind::Decoy => {}
            EpochKind::Sweep => {
                return Err(Error::Mode("budgets apply to UnchainedBandits traces only".into()));
            }
        }
    }
    if peeling != schedule.peeling_epochs() {
        return Err(Error::InvalidParameter(format!(
            "trace has {peeling} peeling epochs, schedule expects {}",
            schedule.peeling_epochs()
        )));
    }
    let decoy_term = match schedule.mode {
        PeelingMode::Exact => {
            let s = input.len() as f64;
            let w = model.width_of(&input) as f64;
            4.0 * s * w * (4.0 * n * s * s / delta).ln() / schedule.delta_gap.powi(2)
        }
        PeelingMode::EpsApprox { .. } => 0.0,
    };
    let total = peeling_terms.iter().sum::<f64>() + decoy_term;
    Ok(BudgetBreakdown {
        peeling_terms,
        eps_widths,
        decoy_term,
        total,
    })
}

fn check_subset(model: &PosetModel, set: &ArmSet) -> Result<()> {
    match set.iter().find(|&a| a >= model.arm_count()) {
        Some(a) => Err(Error::UnknownArm(a)),
        None => Ok(()),
    }
}

/// Peeling cost factor `C_{α,γ}(n)`.
///
/// Equals `(1−α)·Σ_{t=1}^{n−1} γ^{2(n−t)}·α^{t−1} + α^{n−1}`, evaluated in
/// closed form away from `α = γ²` and by its limit `((1−α)(n−1) + 1)·α^{n−1}`
/// near it. `C(0) = 0`.
pub fn peeling_cost(alpha: f64, gamma: f64, n: usize) -> f64 {
    if n == 0 {
        return 0.0;
    }
    let g2 = gamma * gamma;
    let ni = n as i32;
    if (g2 - alpha).abs() > 1e-6 {
        (g2.powi(ni) * (1.0 - alpha) + alpha.powi(ni) * (g2 - 1.0)) / (g2 - alpha)
    } else {
        ((1.0 - alpha) * (n as f64 - 1.0) + 1.0) * alpha.powi(ni - 1)
    }
}

/// `N_i = min(⌈ln Δ_i / ln γ⌉, N − 1)`.
pub fn arm_epochs(gap: f64, rate: f64, epochs: usize) -> usize {
    let n = (gap.ln() / rate.ln()).ceil().max(0.0) as usize;
    n.min(epochs.saturating_sub(1))
}

/// Regret bounds for the peeling phase (`r0`) and the decoy phase (`r1`).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RegretBounds {
    pub r0: f64,
    pub r1: f64,
}

/// Evaluates both regret bounds for arm gaps `gaps` (Pareto arms have 0).
pub fn regret_bounds(model: &PosetModel, gaps: &[f64], schedule: &PeelingSchedule, alpha_hat: f64) -> Result<RegretBounds> {
    if !(alpha_hat > 0.0 && alpha_hat <= 1.0) {
        return Err(Error::InvalidParameter(format!("α̂ must lie in (0, 1], got {alpha_hat}")));
    }
    let k = model.arm_count() as f64;
    let n = schedule.epochs;
    let rate = schedule.rate;
    let log_term = (2.0 * n as f64 * k * k / schedule.delta).ln();
    let r0_sum: f64 = gaps
        .iter()
        .filter(|&&g| g > 0.0)
        .map(|&g| peeling_cost(alpha_hat, rate, arm_epochs(g, rate, n)) / g)
        .sum();
    let r0 = 2.0 * k / (rate * rate) * log_term * r0_sum;
    let last_eps = schedule.eps(schedule.peeling_epochs());
    let r1_sum: f64 = gaps.iter().filter(|&&g| g > 0.0 && g < last_eps).map(|&g| 1.0 / g).sum();
    let r1 = match schedule.mode {
        PeelingMode::Exact => k * model.width() as f64 * log_term * r1_sum,
        PeelingMode::EpsApprox { .. } => 0.0,
    };
    Ok(RegretBounds { r0, r1 })
}

/// `d(P)`: the smallest gap between a Pareto arm and an arm it dominates,
/// or `+∞` when every arm is on the front.
pub fn pareto_gap(model: &PosetModel) -> f64 {
    let front = model.pareto_front();
    let mut best = f64::INFINITY;
    for i in front.iter() {
        for j in model.arms().iter() {
            if !front.contains(j) && model.prefers(i, j) {
                best = best.min(model.gamma(i, j));
            }
        }
    }
    best
}

/// Pareto front by a literal scan: arms no other arm is preferred to.
pub fn brute_force_front(model: &PosetModel) -> ArmSet {
    let k = model.arm_count();
    (0..k).filter(|&a| (0..k).all(|b| !model.prefers(b, a))).collect()
}

/// The largest ε-approximation of the front (lexicographically first among
/// those of maximal size), by enumerating supersets of the front.
pub fn brute_force_eps_front(model: &PosetModel, eps: f64, cap: usize) -> Result<ArmSet> {
    let k = model.arm_count();
    if k > cap.min(30) {
        return Err(Error::AnalysisCapExceeded { size: k, cap: cap.min(30) });
    }
    let front = brute_force_front(model);
    let rest: Vec<usize> = (0..k).filter(|a| !front.contains(*a)).collect();
    let indist = |a: usize, b: usize| model.gamma(a, b).abs() <= eps;
    let mut best: Option<Vec<usize>> = None;
    for mask in 0u64..(1u64 << rest.len()) {
        let mut set = front.to_vec();
        set.extend(rest.iter().enumerate().filter(|(b, _)| mask >> b & 1 == 1).map(|(_, &a)| a));
        let ok = set.iter().enumerate().all(|(x, &a)| set[x + 1..].iter().all(|&b| indist(a, b)));
        if !ok {
            continue;
        }
        set.sort_unstable();
        let better = match &best {
            None => true,
            Some(b) => set.len() > b.len() || (set.len() == b.len() && set < *b),
        };
        if better {
            best = Some(set);
        }
    }
    Ok(best.unwrap_or_default().into_iter().collect())
}

/// Bounds and observations for one UnchainedBandits run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundReport {
    pub arm_count: usize,
    pub width: usize,
    pub epochs: usize,
    pub rate: f64,
    pub eps0: f64,
    pub delta: f64,
    pub delta_gap: f64,
    pub arm_gaps: Vec<f64>,
    pub alpha_hat: Option<f64>,
    /// α̂ comes from the single observed trace, not from its definition over
    /// every possible ε-approximation.
    pub alpha_is_trace_estimate: bool,
    pub budget: BudgetBreakdown,
    pub r0_bound: Option<f64>,
    pub r1_bound: f64,
    pub observed_duels: u64,
    pub observed_peeling_regret: f64,
    /// Decoy-phase regret carried by the original arms.
    pub observed_decoy_regret: f64,
    /// Decoy-phase regret including the decoys' own gaps.
    pub observed_decoy_regret_total: f64,
    pub within_budget: bool,
    pub r0_holds: Option<bool>,
    pub r1_holds: bool,
}

/// Builds the [`BoundReport`] of an UnchainedBandits trace on `model`.
pub fn bound_report(model: &PosetModel, trace: &RunTrace, cap: usize) -> Result<BoundReport> {
    let schedule = trace
        .schedule
        .ok_or_else(|| Error::Mode(format!("trace of {:?} carries no peeling schedule", trace.algorithm)))?;
    if trace.arm_count != model.arm_count() {
        return Err(Error::InvalidParameter(format!(
            "trace covers {} arms, model has {}",
            trace.arm_count,
            model.arm_count()
        )));
    }
    let env = DuelEnvironment::new(model.clone(), Observability::Partial, 0)?;
    let gaps: Vec<f64> = (0..model.arm_count()).map(|i| env.arm_gap(i)).collect::<Result<_>>()?;
    let budget = sample_budget(model, &schedule, trace, cap)?;
    let alpha_hat = estimate_alpha(trace, model.arm_count()).ok();
    // Without a peeling epoch the peeling regret is zero and α plays no role.
    let bounds = regret_bounds(model, &gaps, &schedule, alpha_hat.unwrap_or(1.0))?;
    let r0_bound = alpha_hat.map(|_| bounds.r0);
    Ok(BoundReport {
        arm_count: model.arm_count(),
        width: model.width(),
        epochs: schedule.epochs,
        rate: schedule.rate,
        eps0: schedule.eps0,
        delta: schedule.delta,
        delta_gap: schedule.delta_gap,
        arm_gaps: gaps,
        alpha_hat,
        alpha_is_trace_estimate: true,
        within_budget: trace.total_duels as f64 <= budget.total,
        budget,
        r0_holds: r0_bound.map(|b| trace.peeling_regret <= b),
        r0_bound,
        r1_bound: bounds.r1,
        r1_holds: trace.decoy_regret_base <= bounds.r1,
        observed_duels: trace.total_duels,
        observed_peeling_regret: trace.peeling_regret,
        observed_decoy_regret: trace.decoy_regret_base,
        observed_decoy_regret_total: trace.decoy_regret,
    })
}
