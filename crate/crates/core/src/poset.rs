//! Finite posets carrying a preference-gap table.
//!
//! A [`PosetModel`] is the ground truth of a simulated dueling problem: a
//! strict partial order over `K` dense arm identifiers together with the gap
//! `γ_ij = P(i beats j) − 1/2` for every ordered pair. The order is stored
//! transitively closed so `≻` and `∥` queries are table lookups.

use std::collections::BTreeSet;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Dense arm identifier, `0..K`.
pub type Arm = usize;

/// Default size cap for exponential analyses (ε-width, ε-front search).
pub const DEFAULT_ANALYSIS_CAP: usize = 24;

/// An ordered set of arms without duplicates.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ArmSet(BTreeSet<Arm>);

impl ArmSet {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn contains(&self, arm: Arm) -> bool {
        self.0.contains(&arm)
    }

    pub fn insert(&mut self, arm: Arm) -> bool {
        self.0.insert(arm)
    }

    pub fn remove(&mut self, arm: Arm) -> bool {
        self.0.remove(&arm)
    }

    pub fn iter(&self) -> impl Iterator<Item = Arm> + '_ {
        self.0.iter().copied()
    }

    pub fn is_subset(&self, other: &ArmSet) -> bool {
        self.0.is_subset(&other.0)
    }

    pub fn to_vec(&self) -> Vec<Arm> {
        self.0.iter().copied().collect()
    }
}

impl FromIterator<Arm> for ArmSet {
    fn from_iter<I: IntoIterator<Item = Arm>>(iter: I) -> Self {
        ArmSet(iter.into_iter().collect())
    }
}

impl<'a> IntoIterator for &'a ArmSet {
    type Item = Arm;
    type IntoIter = std::iter::Copied<std::collections::btree_set::Iter<'a, Arm>>;

    fn into_iter(self) -> Self::IntoIter {
        self.0.iter().copied()
    }
}

impl From<Vec<Arm>> for ArmSet {
    fn from(v: Vec<Arm>) -> Self {
        v.into_iter().collect()
    }
}

/// Ground-truth partial order plus preference gaps.
///
/// Invariants (checked by every constructor):
/// * the strict order is irreflexive, antisymmetric and transitively closed;
/// * `γ_ji = −γ_ij`, `γ_ii = 0`, and `|γ_ij| < 1/2`;
/// * order compatibility: `i ≻ j` iff `γ_ij > 0`;
/// * partial observability: `i ∥ j` implies `γ_ij = 0`.
#[derive(Clone, Debug, PartialEq)]
pub struct PosetModel {
    k: usize,
    above: Vec<bool>,
    gamma: Vec<f64>,
}

impl PosetModel {
    /// Builds a model from strict relations `(i, j)` meaning `i ≻ j` and gap
    /// assignments `(i, j, γ_ij)`. The relation is transitively closed first;
    /// gaps are written antisymmetrically.
    pub fn new(
        k: usize,
        relations: impl IntoIterator<Item = (Arm, Arm)>,
        gammas: impl IntoIterator<Item = (Arm, Arm, f64)>,
    ) -> Result<Self> {
        let mut above = vec![false; k * k];
        for (i, j) in relations {
            check_arm(k, i)?;
            check_arm(k, j)?;
            if i == j {
                return Err(Error::InvalidPoset(format!("reflexive strict relation {i} ≻ {i}")));
            }
            above[i * k + j] = true;
        }
        close_transitively(k, &mut above);
        if let Some(i) = (0..k).find(|&i| above[i * k + i]) {
            return Err(Error::InvalidPoset(format!(
                "strict order contains a cycle through arm {i}"
            )));
        }
        let mut gamma = vec![0.0; k * k];
        for (i, j, g) in gammas {
            check_arm(k, i)?;
            check_arm(k, j)?;
            if i == j && g != 0.0 {
                return Err(Error::InvalidPoset(format!("γ_{i}{i} = {g} must be 0")));
            }
            gamma[i * k + j] = g;
            gamma[j * k + i] = -g;
        }
        let model = PosetModel { k, above, gamma };
        model.validate()?;
        Ok(model)
    }

    /// `k` pairwise incomparable arms.
    pub fn antichain(k: usize) -> Self {
        PosetModel {
            k,
            above: vec![false; k * k],
            gamma: vec![0.0; k * k],
        }
    }

    /// Total order `0 ≻ 1 ≻ … ≻ k−1` with the same gap on every pair.
    pub fn chain(k: usize, gap: f64) -> Result<Self> {
        let rel = (1..k).map(|i| (i - 1, i));
        let gam = (0..k).flat_map(|i| (i + 1..k).map(move |j| (i, j, gap)));
        Self::new(k, rel, gam)
    }

    /// Re-checks every invariant and reports the first violation.
    pub fn validate(&self) -> Result<()> {
        let k = self.k;
        for i in 0..k {
            if self.above[i * k + i] {
                return Err(Error::InvalidPoset(format!("irreflexivity violated at {i}")));
            }
            if self.gamma[i * k + i] != 0.0 {
                return Err(Error::InvalidPoset(format!("γ_{i}{i} must be 0")));
            }
            for j in 0..k {
                if i == j {
                    continue;
                }
                let (ij, ji) = (self.above[i * k + j], self.above[j * k + i]);
                if ij && ji {
                    return Err(Error::InvalidPoset(format!(
                        "antisymmetry violated between {i} and {j}"
                    )));
                }
                let g = self.gamma[i * k + j];
                if !g.is_finite() || g <= -0.5 || g >= 0.5 {
                    return Err(Error::InvalidPoset(format!("γ_{i}{j} = {g} outside (−1/2, 1/2)")));
                }
                if g != -self.gamma[j * k + i] {
                    return Err(Error::InvalidPoset(format!("γ_{j}{i} ≠ −γ_{i}{j}")));
                }
                if ij != (g > 0.0) {
                    return Err(Error::InvalidPoset(format!(
                        "order compatibility violated: {i} ≻ {j} is {ij} but γ_{i}{j} = {g}"
                    )));
                }
                if !ij && !ji && g != 0.0 {
                    return Err(Error::InvalidPoset(format!(
                        "partial observability violated: {i} ∥ {j} but γ_{i}{j} = {g}"
                    )));
                }
                if ij {
                    for l in 0..k {
                        if self.above[j * k + l] && !self.above[i * k + l] {
                            return Err(Error::InvalidPoset(format!(
                                "transitivity violated: {i} ≻ {j} ≻ {l}"
                            )));
                        }
                    }
                }
            }
        }
        Ok(())
    }

    pub fn arm_count(&self) -> usize {
        self.k
    }

    pub fn arms(&self) -> ArmSet {
        (0..self.k).collect()
    }

    /// `i ≻ j`.
    pub fn prefers(&self, i: Arm, j: Arm) -> bool {
        self.above[i * self.k + j]
    }

    /// `i ≽ j`.
    pub fn dominates_or_equal(&self, i: Arm, j: Arm) -> bool {
        i == j || self.prefers(i, j)
    }

    pub fn comparable(&self, i: Arm, j: Arm) -> bool {
        i == j || self.prefers(i, j) || self.prefers(j, i)
    }

    pub fn gamma(&self, i: Arm, j: Arm) -> f64 {
        self.gamma[i * self.k + j]
    }

    /// Largest |γ| over all pairs.
    pub fn max_abs_gamma(&self) -> f64 {
        self.gamma.iter().fold(0.0, |m, g| m.max(g.abs()))
    }

    /// The maximal elements: arms dominated by no other arm.
    pub fn pareto_front(&self) -> ArmSet {
        self.front_of(&self.arms())
    }

    /// Maximal elements of the restriction of the order to `set`.
    pub fn front_of(&self, set: &ArmSet) -> ArmSet {
        set.iter()
            .filter(|&a| !set.iter().any(|b| self.prefers(b, a)))
            .collect()
    }

    pub fn width(&self) -> usize {
        self.width_of(&self.arms())
    }

    pub fn height(&self) -> usize {
        self.height_of(&self.arms())
    }

    /// Size of a maximum antichain of `set`, via Dilworth: `|set|` minus a
    /// maximum matching in the bipartite split of the (closed) order.
    pub fn width_of(&self, set: &ArmSet) -> usize {
        let arms = set.to_vec();
        let n = arms.len();
        let mut match_right: Vec<Option<usize>> = vec![None; n];
        let mut matched = 0;
        for u in 0..n {
            let mut seen = vec![false; n];
            if self.augment(&arms, u, &mut seen, &mut match_right) {
                matched += 1;
            }
        }
        n - matched
    }

    fn augment(
        &self,
        arms: &[Arm],
        u: usize,
        seen: &mut [bool],
        match_right: &mut [Option<usize>],
    ) -> bool {
        for v in 0..arms.len() {
            if seen[v] || !self.prefers(arms[u], arms[v]) {
                continue;
            }
            seen[v] = true;
            let free = match match_right[v] {
                None => true,
                Some(w) => self.augment(arms, w, seen, match_right),
            };
            if free {
                match_right[v] = Some(u);
                return true;
            }
        }
        false
    }

    /// Length of a longest strict chain inside `set`.
    pub fn height_of(&self, set: &ArmSet) -> usize {
        let mut arms = set.to_vec();
        // Fewer dominators first gives a linear extension of the closed order.
        arms.sort_by_key(|&a| arms_above(self, set, a));
        let mut longest = vec![1usize; arms.len()];
        for j in 0..arms.len() {
            for i in 0..j {
                if self.prefers(arms[i], arms[j]) {
                    longest[j] = longest[j].max(longest[i] + 1);
                }
            }
        }
        longest.into_iter().max().unwrap_or(0)
    }

    /// Size of the largest ε-antichain (pairwise `|γ| ≤ eps`) of the whole model.
    pub fn eps_width(&self, eps: f64, cap: usize) -> Result<usize> {
        self.eps_width_of(&self.arms(), eps, cap)
    }

    /// Size of the largest ε-antichain inside `set`. Exponential in the worst
    /// case; sets larger than `cap` (or 64) are rejected.
    pub fn eps_width_of(&self, set: &ArmSet, eps: f64, cap: usize) -> Result<usize> {
        if eps < 0.0 || eps.is_nan() {
            return Err(Error::InvalidParameter(format!("eps must be ≥ 0, got {eps}")));
        }
        let arms = set.to_vec();
        let n = arms.len();
        if n > cap.min(64) {
            return Err(Error::AnalysisCapExceeded { size: n, cap: cap.min(64) });
        }
        let adj: Vec<u64> = (0..n)
            .map(|i| {
                (0..n)
                    .filter(|&j| j != i && self.gamma(arms[i], arms[j]).abs() <= eps)
                    .fold(0u64, |m, j| m | (1 << j))
            })
            .collect();
        let all = if n == 64 { u64::MAX } else { (1u64 << n) - 1 };
        let mut best = 0;
        max_clique(&adj, 0, all, 0, &mut best);
        Ok(best)
    }

    /// `true` iff every pair of distinct members is ε-indistinguishable.
    pub fn is_eps_antichain(&self, set: &ArmSet, eps: f64) -> bool {
        let v = set.to_vec();
        v.iter()
            .enumerate()
            .all(|(x, &a)| v[x + 1..].iter().all(|&b| self.gamma(a, b).abs() <= eps))
    }

    /// `candidate` contains the Pareto front and is an ε-antichain.
    pub fn is_eps_approximation(&self, candidate: &ArmSet, eps: f64) -> bool {
        self.pareto_front().is_subset(candidate) && self.is_eps_antichain(candidate, eps)
    }

    /// Appends a Δ-decoy `a'` of `a`: every `b ≽ a` strictly beats `a'` with
    /// gap `max(γ_ba, Δ)`, every other arm is incomparable to `a'`, and all
    /// existing pairs are untouched. Returns the extended model and `a'`.
    pub fn extend_with_decoy(&self, a: Arm, delta: f64) -> Result<(PosetModel, Arm)> {
        check_arm(self.k, a)?;
        if !(delta > 0.0 && delta < 0.5) {
            return Err(Error::InvalidParameter(format!(
                "decoy gap must lie in (0, 1/2), got {delta}"
            )));
        }
        let (k, n) = (self.k, self.k + 1);
        let mut above = vec![false; n * n];
        let mut gamma = vec![0.0; n * n];
        for i in 0..k {
            above[i * n..i * n + k].copy_from_slice(&self.above[i * k..(i + 1) * k]);
            gamma[i * n..i * n + k].copy_from_slice(&self.gamma[i * k..(i + 1) * k]);
        }
        let decoy = k;
        for b in 0..k {
            if self.dominates_or_equal(b, a) {
                let g = self.gamma(b, a).max(delta);
                above[b * n + decoy] = true;
                gamma[b * n + decoy] = g;
                gamma[decoy * n + b] = -g;
            }
        }
        let model = PosetModel { k: n, above, gamma };
        debug_assert!(model.validate().is_ok());
        Ok((model, decoy))
    }

    /// Cover relations (transitive reduction) of the closed order.
    pub fn cover_relations(&self) -> Vec<(Arm, Arm)> {
        let k = self.k;
        let mut out = Vec::new();
        for i in 0..k {
            for j in 0..k {
                if self.prefers(i, j) && !(0..k).any(|m| self.prefers(i, m) && self.prefers(m, j)) {
                    out.push((i, j));
                }
            }
        }
        out
    }

    pub fn to_file(&self) -> PosetFile {
        let k = self.k;
        let mut gamma = Vec::new();
        for i in 0..k {
            for j in 0..k {
                if self.prefers(i, j) {
                    gamma.push((i, j, self.gamma(i, j)));
                }
            }
        }
        PosetFile {
            arms: k,
            strict_order: self.cover_relations().into_iter().map(|(i, j)| [i, j]).collect(),
            gamma,
        }
    }

    pub fn from_file(file: &PosetFile) -> Result<Self> {
        Self::new(
            file.arms,
            file.strict_order.iter().map(|&[i, j]| (i, j)),
            file.gamma.iter().copied(),
        )
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let text = fs::read_to_string(path)?;
        let file: PosetFile = serde_json::from_str(&text)?;
        Self::from_file(&file)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        fs::write(path, serde_json::to_string_pretty(&self.to_file())?)?;
        Ok(())
    }
}

/// On-disk JSON form of a [`PosetModel`]. `strict_order` may be any relation
/// whose transitive closure is the order; `gamma` lists comparable pairs only.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PosetFile {
    pub arms: usize,
    pub strict_order: Vec<[Arm; 2]>,
    pub gamma: Vec<(Arm, Arm, f64)>,
}

fn check_arm(k: usize, a: Arm) -> Result<()> {
    if a < k {
        Ok(())
    } else {
        Err(Error::UnknownArm(a))
    }
}

fn close_transitively(k: usize, rel: &mut [bool]) {
    for m in 0..k {
        for i in 0..k {
            if !rel[i * k + m] {
                continue;
            }
            for j in 0..k {
                if rel[m * k + j] {
                    rel[i * k + j] = true;
                }
            }
        }
    }
}

fn arms_above(model: &PosetModel, set: &ArmSet, a: Arm) -> usize {
    set.iter().filter(|&b| model.prefers(b, a)).count()
}

// Bron–Kerbosch with pivoting over bitmasks; records the largest clique size.
fn max_clique(adj: &[u64], r_size: usize, mut p: u64, mut x: u64, best: &mut usize) {
    if p == 0 {
        if x == 0 {
            *best = (*best).max(r_size);
        }
        return;
    }
    if r_size + p.count_ones() as usize <= *best {
        return;
    }
    let pivot = (p | x).trailing_zeros() as usize;
    let mut candidates = p & !adj[pivot];
    while candidates != 0 {
        let v = candidates.trailing_zeros() as usize;
        candidates &= candidates - 1;
        max_clique(adj, r_size + 1, p & adj[v], x & adj[v], best);
        p &= !(1 << v);
        x |= 1 << v;
    }
}
