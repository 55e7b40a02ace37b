// Helpers shared by the integration tests: random posets and exhaustive
// reference computations that deliberately avoid the library's algorithms.
#![allow(dead_code)]

use posetduel::{PosetModel, RunRng};
use rand::seq::SliceRandom;
use rand::Rng;

/// A random poset on `k` arms: random relations along a shuffled order,
/// closed transitively, with gaps drawn from `[0.01, 0.49)`.
pub fn random_poset(rng: &mut RunRng, k: usize, density: f64) -> PosetModel {
    let mut perm: Vec<usize> = (0..k).collect();
    perm.shuffle(rng);
    let mut above = vec![vec![false; k]; k];
    for x in 0..k {
        for y in x + 1..k {
            if rng.gen_bool(density) {
                above[perm[x]][perm[y]] = true;
            }
        }
    }
    for m in 0..k {
        for i in 0..k {
            for j in 0..k {
                if above[i][m] && above[m][j] {
                    above[i][j] = true;
                }
            }
        }
    }
    let mut rel = Vec::new();
    let mut gam = Vec::new();
    for (i, row) in above.iter().enumerate() {
        for (j, &a) in row.iter().enumerate() {
            if a {
                rel.push((i, j));
                gam.push((i, j, rng.gen_range(0.01..0.49)));
            }
        }
    }
    PosetModel::new(k, rel, gam).expect("random poset is valid")
}

fn subsets(k: usize) -> impl Iterator<Item = Vec<usize>> {
    (0u32..1 << k).map(move |m| (0..k).filter(|&i| m >> i & 1 == 1).collect())
}

fn all_pairs(set: &[usize], f: impl Fn(usize, usize) -> bool) -> bool {
    set.iter().enumerate().all(|(x, &a)| set[x + 1..].iter().all(|&b| f(a, b)))
}

/// Largest subset whose pairs are all incomparable.
pub fn brute_width(m: &PosetModel) -> usize {
    subsets(m.arm_count())
        .filter(|s| all_pairs(s, |a, b| !m.prefers(a, b) && !m.prefers(b, a)))
        .map(|s| s.len())
        .max()
        .unwrap_or(0)
}

/// Largest subset whose pairs are all comparable.
pub fn brute_height(m: &PosetModel) -> usize {
    subsets(m.arm_count())
        .filter(|s| all_pairs(s, |a, b| m.prefers(a, b) || m.prefers(b, a)))
        .map(|s| s.len())
        .max()
        .unwrap_or(0)
}

/// Largest subset whose pairs all have `|γ| ≤ eps`.
pub fn brute_eps_width(m: &PosetModel, eps: f64) -> usize {
    subsets(m.arm_count())
        .filter(|s| all_pairs(s, |a, b| m.gamma(a, b).abs() <= eps))
        .map(|s| s.len())
        .max()
        .unwrap_or(0)
}

/// Arms no other arm is preferred to.
pub fn brute_front(m: &PosetModel) -> Vec<usize> {
    let k = m.arm_count();
    (0..k).filter(|&a| (0..k).all(|b| !m.prefers(b, a))).collect()
}

/// Smallest `γ_ij` with `i` on the front and `j ≺ i` off it.
pub fn brute_pareto_gap(m: &PosetModel) -> f64 {
    let front = brute_front(m);
    let mut best = f64::INFINITY;
    for &i in &front {
        for j in 0..m.arm_count() {
            if !front.contains(&j) && m.prefers(i, j) {
                best = best.min(m.gamma(i, j));
            }
        }
    }
    best
}

/// Distance of `i` to the front: smallest `γ_pi` over front arms `p ≻ i`.
pub fn brute_arm_gap(m: &PosetModel, i: usize) -> f64 {
    let front = brute_front(m);
    if front.contains(&i) {
        return 0.0;
    }
    front
        .iter()
        .filter(|&&p| m.prefers(p, i))
        .map(|&p| m.gamma(p, i))
        .fold(f64::INFINITY, f64::min)
}
