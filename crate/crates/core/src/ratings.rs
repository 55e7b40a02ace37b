//! Duels over a user–item ratings file.
//!
//! A duel between two items picks a user who rated both, uniformly with
//! replacement, and lets the higher rating win; ties are a fair coin. This
//! gives each pair a fixed dataset-determined win rate, so UnchainedBandits
//! can run on real preference data in ε-approximation mode.

use std::collections::{BTreeMap, HashMap};
use std::path::Path;

use log::{info, warn};
use rand::{Rng, SeedableRng};
use serde::{Deserialize, Serialize};

use crate::compare::{PairStats, StatsStore};
use crate::env::{DuelOutcome, DuelSource, RunRng};
use crate::error::{Error, Result};
use crate::poset::{Arm, ArmSet};

/// Ratings of the retained items, indexed by dense item position.
#[derive(Clone, Debug, Default)]
pub struct RatingsTable {
    item_ids: Vec<u64>,
    /// Per item, `(user, rating)` sorted by user.
    ratings: Vec<Vec<(u64, f64)>>,
    duplicates: u64,
}

impl RatingsTable {
    /// Builds a table from `(user, item, rating)` triples; later duplicates win.
    pub fn from_triples(triples: impl IntoIterator<Item = (u64, u64, f64)>, min_count: usize) -> Result<Self> {
        let mut by_item: BTreeMap<u64, Vec<(u64, f64)>> = BTreeMap::new();
        for (user, item, rating) in triples {
            by_item.entry(item).or_default().push((user, rating));
        }
        Self::finish(by_item, min_count)
    }

    fn finish(by_item: BTreeMap<u64, Vec<(u64, f64)>>, min_count: usize) -> Result<Self> {
        let mut table = RatingsTable::default();
        for (item, mut rows) in by_item {
            // Stable sort keeps file order within a user; keep the last row.
            rows.sort_by_key(|&(u, _)| u);
            let mut dedup: Vec<(u64, f64)> = Vec::with_capacity(rows.len());
            for (u, r) in rows {
                match dedup.last_mut() {
                    Some(last) if last.0 == u => {
                        table.duplicates += 1;
                        *last = (u, r);
                    }
                    _ => dedup.push((u, r)),
                }
            }
            if dedup.len() >= min_count {
                table.item_ids.push(item);
                table.ratings.push(dedup);
            }
        }
        if table.duplicates > 0 {
            warn!("{} duplicate (user, item) ratings replaced by their last occurrence", table.duplicates);
        }
        if table.item_ids.is_empty() {
            return Err(Error::NoItemsRetained { min_count });
        }
        info!("retained {} items with at least {min_count} ratings", table.item_ids.len());
        Ok(table)
    }

    pub fn item_count(&self) -> usize {
        self.item_ids.len()
    }

    /// External identifier of the item at position `arm`.
    pub fn item_id(&self, arm: Arm) -> Option<u64> {
        self.item_ids.get(arm).copied()
    }

    pub fn item_ids(&self) -> &[u64] {
        &self.item_ids
    }

    pub fn rating_count(&self, arm: Arm) -> usize {
        self.ratings.get(arm).map_or(0, Vec::len)
    }

    pub fn duplicates(&self) -> u64 {
        self.duplicates
    }

    /// Ratings given to both items by the same user, as `(r_i, r_j)`.
    pub fn co_ratings(&self, i: Arm, j: Arm) -> Result<Vec<(f64, f64)>> {
        let a = self.ratings.get(i).ok_or(Error::UnknownArm(i))?;
        let b = self.ratings.get(j).ok_or(Error::UnknownArm(j))?;
        let (mut x, mut y) = (0, 0);
        let mut out = Vec::new();
        while x < a.len() && y < b.len() {
            match a[x].0.cmp(&b[y].0) {
                std::cmp::Ordering::Less => x += 1,
                std::cmp::Ordering::Greater => y += 1,
                std::cmp::Ordering::Equal => {
                    out.push((a[x].1, b[y].1));
                    x += 1;
                    y += 1;
                }
            }
        }
        Ok(out)
    }

    /// Exact probability that `i` wins a duel against `j`.
    pub fn win_rate(&self, i: Arm, j: Arm) -> Result<f64> {
        let co = self.co_ratings(i, j)?;
        if co.is_empty() {
            return Err(Error::NoCommonEvaluator(i, j));
        }
        let score: f64 = co
            .iter()
            .map(|&(a, b)| if a > b { 1.0 } else if a < b { 0.0 } else { 0.5 })
            .sum();
        Ok(score / co.len() as f64)
    }
}

/// Reads a CSV with header `user,item,rating[,timestamp]` and keeps items
/// rated by at least `min_count` distinct users.
///
/// The file is read twice so that only candidate items are held in memory.
pub fn load_ratings(path: impl AsRef<Path>, min_count: usize) -> Result<RatingsTable> {
    let path = path.as_ref();
    let mut counts: HashMap<u64, usize> = HashMap::new();
    for_each_row(path, |_, item, _| {
        *counts.entry(item).or_default() += 1;
    })?;
    let mut by_item: BTreeMap<u64, Vec<(u64, f64)>> = counts
        .into_iter()
        .filter(|&(_, c)| c >= min_count)
        .map(|(item, c)| (item, Vec::with_capacity(c)))
        .collect();
    for_each_row(path, |user, item, rating| {
        if let Some(rows) = by_item.get_mut(&item) {
            rows.push((user, rating));
        }
    })?;
    RatingsTable::finish(by_item, min_count)
}

fn for_each_row(path: &Path, mut f: impl FnMut(u64, u64, f64)) -> Result<()> {
    let mut reader = csv::ReaderBuilder::new().has_headers(true).flexible(true).from_path(path)?;
    let mut record = csv::StringRecord::new();
    loop {
        let more = reader.read_record(&mut record).map_err(|e| {
            let line = e.position().map_or(0, |p| p.line());
            Error::MalformedRatings { line, message: e.to_string() }
        })?;
        if !more {
            break;
        }
        let line = record.position().map_or(0, |p| p.line());
        let bad = |message: String| Error::MalformedRatings { line, message };
        if record.len() < 3 {
            return Err(bad(format!("expected at least 3 fields, found {}", record.len())));
        }
        let user: u64 = record[0].trim().parse().map_err(|_| bad(format!("bad user id {:?}", &record[0])))?;
        let item: u64 = record[1].trim().parse().map_err(|_| bad(format!("bad item id {:?}", &record[1])))?;
        let rating: f64 = record[2].trim().parse().map_err(|_| bad(format!("bad rating {:?}", &record[2])))?;
        if !rating.is_finite() {
            return Err(bad(format!("rating {rating} is not finite")));
        }
        f(user, item, rating);
    }
    Ok(())
}

/// One duel between items `i` and `j`.
pub fn ratings_duel<R: Rng + ?Sized>(table: &RatingsTable, i: Arm, j: Arm, rng: &mut R) -> Result<DuelOutcome> {
    if i == j {
        return Err(Error::SameArm(i));
    }
    let co = table.co_ratings(i, j)?;
    duel_from(&co, i, j, rng)
}

fn duel_from<R: Rng + ?Sized>(co: &[(f64, f64)], i: Arm, j: Arm, rng: &mut R) -> Result<DuelOutcome> {
    if co.is_empty() {
        return Err(Error::NoCommonEvaluator(i, j));
    }
    let (a, b) = co[rng.gen_range(0..co.len())];
    let i_wins = if a == b { rng.gen_bool(0.5) } else { a > b };
    Ok(DuelOutcome {
        winner: Some(if i_wins { i } else { j }),
        comparable: None,
    })
}

/// A [`DuelSource`] over a [`RatingsTable`]. Decoys are not available.
pub struct RatingsOracle<'a> {
    table: &'a RatingsTable,
    rng: RunRng,
    duels: u64,
    co_cache: HashMap<(Arm, Arm), Vec<(f64, f64)>>,
    tallies: StatsStore,
}

impl<'a> RatingsOracle<'a> {
    pub fn new(table: &'a RatingsTable, seed: u64) -> Self {
        RatingsOracle {
            table,
            rng: RunRng::seed_from_u64(seed),
            duels: 0,
            co_cache: HashMap::new(),
            tallies: StatsStore::new(),
        }
    }

    pub fn table(&self) -> &RatingsTable {
        self.table
    }

    /// Outcomes of every duel served so far.
    pub fn tallies(&self) -> &StatsStore {
        &self.tallies
    }
}

impl DuelSource for RatingsOracle<'_> {
    fn duel(&mut self, i: Arm, j: Arm) -> Result<DuelOutcome> {
        if i == j {
            return Err(Error::SameArm(i));
        }
        let key = (i.min(j), i.max(j));
        if !self.co_cache.contains_key(&key) {
            let co = self.table.co_ratings(key.0, key.1)?;
            self.co_cache.insert(key, co);
        }
        let co = &self.co_cache[&key];
        let out = duel_from(co, key.0, key.1, &mut self.rng)?;
        self.duels += 1;
        let winner = out.winner.expect("ratings duels always have a winner");
        self.tallies.record(i, j, winner == i);
        Ok(out)
    }

    fn duel_count(&self) -> u64 {
        self.duels
    }

    fn rng(&mut self) -> &mut RunRng {
        &mut self.rng
    }

    fn base_arms(&self) -> ArmSet {
        (0..self.table.item_count()).collect()
    }
}

/// One line of the front listing.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FrontEntry {
    pub rank: usize,
    pub item: u64,
    /// Mean empirical win rate against the other listed items.
    pub mean_p_hat: f64,
    pub ratings: usize,
}

/// Final empirical win rate of one listed pair.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PairEntry {
    pub item_a: u64,
    pub item_b: u64,
    pub p_hat: Option<f64>,
    pub duels: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FrontListing {
    pub items: Vec<FrontEntry>,
    pub pairs: Vec<PairEntry>,
}

impl FrontListing {
    /// Ranks `front` by mean empirical win rate against the rest of it.
    pub fn build(table: &RatingsTable, tallies: &StatsStore, front: &ArmSet) -> Self {
        let arms = front.to_vec();
        let stat = |a: Arm, b: Arm| -> PairStats { tallies.get(a, b) };
        let mut items: Vec<FrontEntry> = arms
            .iter()
            .map(|&a| {
                let rates: Vec<f64> = arms.iter().filter(|&&b| b != a).filter_map(|&b| stat(a, b).p_hat()).collect();
                let mean = if rates.is_empty() { 0.5 } else { rates.iter().sum::<f64>() / rates.len() as f64 };
                FrontEntry {
                    rank: 0,
                    item: table.item_ids[a],
                    mean_p_hat: mean,
                    ratings: table.rating_count(a),
                }
            })
            .collect();
        items.sort_by(|x, y| y.mean_p_hat.total_cmp(&x.mean_p_hat).then(x.item.cmp(&y.item)));
        for (r, e) in items.iter_mut().enumerate() {
            e.rank = r + 1;
        }
        let mut pairs = Vec::new();
        for (x, &a) in arms.iter().enumerate() {
            for &b in &arms[x + 1..] {
                let s = stat(a, b);
                pairs.push(PairEntry {
                    item_a: table.item_ids[a],
                    item_b: table.item_ids[b],
                    p_hat: s.p_hat(),
                    duels: s.total,
                });
            }
        }
        FrontListing { items, pairs }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// The ranked items as CSV: `rank,item,mean_p_hat,ratings`.
    pub fn items_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        for e in &self.items {
            w.serialize(e)?;
        }
        let bytes = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
        Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn write(text: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(text.as_bytes()).unwrap();
        f
    }

    #[test]
    fn threshold_filter() {
        let mut text = String::from("user,item,rating,timestamp\n");
        for (item, n) in [(10u64, 5u64), (20, 2), (30, 9)] {
            for u in 0..n {
                text += &format!("{u},{item},3.5,0\n");
            }
        }
        let f = write(&text);
        let t = load_ratings(f.path(), 5).unwrap();
        assert_eq!(t.item_ids(), &[10, 30]);
        assert!(matches!(load_ratings(f.path(), 10), Err(Error::NoItemsRetained { min_count: 10 })));
    }

    #[test]
    fn duplicates_keep_last() {
        let f = write("user,item,rating\n1,7,2\n1,7,5\n2,7,1\n");
        let t = load_ratings(f.path(), 1).unwrap();
        assert_eq!(t.rating_count(0), 2);
        assert_eq!(t.duplicates(), 1);
        assert_eq!(t.ratings[0], vec![(1, 5.0), (2, 1.0)]);
    }

    #[test]
    fn malformed_row_reports_line() {
        let f = write("user,item,rating\n1,7,2\n1,x,5\n");
        match load_ratings(f.path(), 1) {
            Err(Error::MalformedRatings { line, .. }) => assert_eq!(line, 3),
            other => panic!("unexpected {other:?}"),
        }
        let f = write("user,item,rating\n1,7\n");
        assert!(matches!(load_ratings(f.path(), 1), Err(Error::MalformedRatings { line: 2, .. })));
    }

    #[test]
    fn single_co_rater_is_deterministic() {
        let t = RatingsTable::from_triples([(1, 0, 5.0), (1, 1, 3.0)], 1).unwrap();
        let mut rng = RunRng::seed_from_u64(0);
        for _ in 0..100 {
            assert_eq!(ratings_duel(&t, 0, 1, &mut rng).unwrap().winner, Some(0));
        }
    }

    #[test]
    fn ties_are_fair() {
        let t = RatingsTable::from_triples((0..10).flat_map(|u| [(u, 0, 4.0), (u, 1, 4.0)]), 1).unwrap();
        let mut oracle = RatingsOracle::new(&t, 9);
        let wins = (0..10000).filter(|_| oracle.duel(0, 1).unwrap().winner == Some(0)).count();
        assert!((wins as f64 / 10000.0 - 0.5).abs() <= 0.02);
        assert_eq!(oracle.tallies().get(0, 1).total, 10000);
    }

    #[test]
    fn no_common_evaluator() {
        let t = RatingsTable::from_triples([(1, 0, 5.0), (2, 1, 3.0)], 1).unwrap();
        let mut oracle = RatingsOracle::new(&t, 0);
        assert!(matches!(oracle.duel(0, 1), Err(Error::NoCommonEvaluator(0, 1))));
        assert!(matches!(oracle.decoy_of(0, 0.1), Err(Error::Mode(_))));
    }

    #[test]
    fn listing_is_ranked() {
        let t = RatingsTable::from_triples([(1, 5, 5.0), (1, 6, 3.0), (2, 5, 4.0), (2, 6, 1.0)], 1).unwrap();
        let mut oracle = RatingsOracle::new(&t, 0);
        for _ in 0..20 {
            oracle.duel(1, 0).unwrap();
        }
        let listing = FrontListing::build(&t, oracle.tallies(), &ArmSet::from(vec![0, 1]));
        assert_eq!(listing.items[0].item, 5);
        assert_eq!(listing.pairs[0].p_hat, Some(1.0));
        let csv = listing.items_csv().unwrap();
        assert!(csv.starts_with("rank,item,mean_p_hat,ratings\n"));
    }
}
