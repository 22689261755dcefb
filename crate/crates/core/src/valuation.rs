//! Public set functions `f : 2^J -> Q` and structural checks on them.

use std::collections::BTreeSet;
use std::fmt;

use num_traits::Zero;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::rational::{self, Rational};

/// Largest item count for which an explicit table (2^m entries) is accepted.
pub const MAX_EXPLICIT_ITEMS: usize = 20;
/// Largest item count for brute-force structural checks.
pub const MAX_CHECK_ITEMS: usize = 12;

/// A subset of the items `0..m`.
#[derive(Debug, Clone, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ItemSet(BTreeSet<usize>);

impl ItemSet {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn full(m: usize) -> Self {
        Self((0..m).collect())
    }

    /// Decodes the little-endian characteristic bitmask.
    pub fn from_mask(mask: u64) -> Self {
        Self((0..64).filter(|j| mask >> j & 1 == 1).collect())
    }

    /// Little-endian characteristic bitmask; `None` if an item is >= 64.
    pub fn mask(&self) -> Option<u64> {
        self.0
            .iter()
            .try_fold(0u64, |acc, &j| (j < 64).then(|| acc | 1 << j))
    }

    pub fn insert(&mut self, item: usize) -> bool {
        self.0.insert(item)
    }

    pub fn remove(&mut self, item: usize) -> bool {
        self.0.remove(&item)
    }

    pub fn contains(&self, item: usize) -> bool {
        self.0.contains(&item)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = usize> + '_ {
        self.0.iter().copied()
    }

    pub fn with(&self, item: usize) -> Self {
        let mut s = self.clone();
        s.insert(item);
        s
    }

    pub fn is_disjoint(&self, other: &ItemSet) -> bool {
        self.0.is_disjoint(&other.0)
    }

    /// Fails unless every member is below `m`.
    pub fn check_within(&self, m: usize) -> Result<()> {
        match self.0.iter().next_back() {
            Some(&j) if j >= m => invalid(format!("item {j} out of range for m = {m}")),
            _ => Ok(()),
        }
    }
}

impl FromIterator<usize> for ItemSet {
    fn from_iter<I: IntoIterator<Item = usize>>(iter: I) -> Self {
        Self(iter.into_iter().collect())
    }
}

impl fmt::Display for ItemSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{{")?;
        for (k, j) in self.0.iter().enumerate() {
            if k > 0 {
                write!(f, ",")?;
            }
            write!(f, "{j}")?;
        }
        write!(f, "}}")
    }
}

/// Value oracle for the public component of every agent's valuation.
///
/// Implementations are immutable once built so a single oracle can be shared
/// across threads.
pub trait PublicValuation: Send + Sync {
    /// Size `m` of the item universe.
    fn num_items(&self) -> usize;

    /// Exact `f(S)`. Errors if `S` mentions an item outside the universe.
    fn value(&self, set: &ItemSet) -> Result<Rational>;

    /// Canonical text form, stable across runs; used as a cache key.
    fn describe(&self) -> String;
}

/// `f(S)` = number of distinct viewers watching at least one slot in `S`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CoverageValuation {
    num_viewers: usize,
    viewers_of_slot: Vec<Vec<usize>>,
}

impl CoverageValuation {
    pub fn new(num_viewers: usize, viewers_of_slot: Vec<Vec<usize>>) -> Result<Self> {
        let mut slots = Vec::with_capacity(viewers_of_slot.len());
        for (j, viewers) in viewers_of_slot.into_iter().enumerate() {
            if let Some(&bad) = viewers.iter().find(|&&k| k >= num_viewers) {
                return invalid(format!(
                    "slot {j} lists viewer {bad} but num_viewers = {num_viewers}"
                ));
            }
            let mut viewers = viewers;
            viewers.sort_unstable();
            viewers.dedup();
            slots.push(viewers);
        }
        Ok(Self {
            num_viewers,
            viewers_of_slot: slots,
        })
    }

    pub fn num_viewers(&self) -> usize {
        self.num_viewers
    }

    pub fn viewers_of_slot(&self) -> &[Vec<usize>] {
        &self.viewers_of_slot
    }
}

impl PublicValuation for CoverageValuation {
    fn num_items(&self) -> usize {
        self.viewers_of_slot.len()
    }

    fn value(&self, set: &ItemSet) -> Result<Rational> {
        set.check_within(self.num_items())?;
        let mut seen = vec![false; self.num_viewers];
        let mut count = 0i64;
        for j in set.iter() {
            for &k in &self.viewers_of_slot[j] {
                if !seen[k] {
                    seen[k] = true;
                    count += 1;
                }
            }
        }
        Ok(rational::int(count))
    }

    fn describe(&self) -> String {
        format!("coverage:{}:{:?}", self.num_viewers, self.viewers_of_slot)
    }
}

/// A full table of `2^m` values keyed by characteristic bitmask.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ExplicitValuation {
    m: usize,
    table: Vec<Rational>,
}

impl ExplicitValuation {
    pub fn new(m: usize, table: Vec<Rational>) -> Result<Self> {
        if m > MAX_EXPLICIT_ITEMS {
            return Err(Error::ResourceLimit(format!(
                "explicit table for m = {m} exceeds the {MAX_EXPLICIT_ITEMS}-item limit"
            )));
        }
        if table.len() != 1 << m {
            return invalid(format!(
                "explicit table has {} entries, expected 2^{m} = {}",
                table.len(),
                1usize << m
            ));
        }
        Ok(Self { m, table })
    }

    /// Tabulates another oracle over all subsets.
    pub fn tabulate(f: &dyn PublicValuation) -> Result<Self> {
        let m = f.num_items();
        if m > MAX_EXPLICIT_ITEMS {
            return Err(Error::ResourceLimit(format!("cannot tabulate m = {m}")));
        }
        let table = (0..1u64 << m)
            .map(|mask| f.value(&ItemSet::from_mask(mask)))
            .collect::<Result<Vec<_>>>()?;
        Self::new(m, table)
    }

    pub fn table(&self) -> &[Rational] {
        &self.table
    }
}

impl PublicValuation for ExplicitValuation {
    fn num_items(&self) -> usize {
        self.m
    }

    fn value(&self, set: &ItemSet) -> Result<Rational> {
        set.check_within(self.m)?;
        // m <= 20, so the mask always exists.
        let mask = set.mask().expect("item below 64") as usize;
        Ok(self.table[mask].clone())
    }

    fn describe(&self) -> String {
        let cells: Vec<String> = self.table.iter().map(rational::format).collect();
        format!("explicit:{}:[{}]", self.m, cells.join(","))
    }
}

/// `f(S) = Σ_{j∈S} w_j`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AdditiveValuation {
    weights: Vec<Rational>,
}

impl AdditiveValuation {
    pub fn new(weights: Vec<Rational>) -> Self {
        Self { weights }
    }

    pub fn weights(&self) -> &[Rational] {
        &self.weights
    }
}

impl PublicValuation for AdditiveValuation {
    fn num_items(&self) -> usize {
        self.weights.len()
    }

    fn value(&self, set: &ItemSet) -> Result<Rational> {
        set.check_within(self.num_items())?;
        Ok(set.iter().fold(Rational::zero(), |acc, j| acc + &self.weights[j]))
    }

    fn describe(&self) -> String {
        let cells: Vec<String> = self.weights.iter().map(rational::format).collect();
        format!("additive:[{}]", cells.join(","))
    }
}

fn value_table(f: &dyn PublicValuation, m: usize) -> Result<Vec<Rational>> {
    if m > MAX_CHECK_ITEMS {
        return Err(Error::ResourceLimit(format!(
            "brute-force check over m = {m} items exceeds the {MAX_CHECK_ITEMS}-item limit"
        )));
    }
    if m > f.num_items() {
        return invalid(format!("m = {m} exceeds the oracle's {} items", f.num_items()));
    }
    (0..1u64 << m)
        .map(|mask| f.value(&ItemSet::from_mask(mask)))
        .collect()
}

/// Brute-force submodularity test over the first `m` items.
///
/// Uses the local form `f(S+j) - f(S) >= f(S+j+k) - f(S+k)` for all `S` and
/// distinct `j, k` outside `S`, which is equivalent to diminishing marginals
/// over every pair `S ⊆ T`.
pub fn is_submodular(f: &dyn PublicValuation, m: usize) -> Result<bool> {
    let table = value_table(f, m)?;
    for s in 0..table.len() {
        for j in (0..m).filter(|j| s >> j & 1 == 0) {
            let gain = &table[s | 1 << j] - &table[s];
            for k in (0..m).filter(|&k| k != j && s >> k & 1 == 0) {
                let later = &table[s | 1 << j | 1 << k] - &table[s | 1 << k];
                if later > gain {
                    return Ok(false);
                }
            }
        }
    }
    Ok(true)
}

/// Brute-force check that `S ⊆ T` implies `f(S) <= f(T)`.
pub fn is_monotone(f: &dyn PublicValuation, m: usize) -> Result<bool> {
    let table = value_table(f, m)?;
    Ok((0..table.len()).all(|s| {
        (0..m)
            .filter(|j| s >> j & 1 == 0)
            .all(|j| table[s] <= table[s | 1 << j])
    }))
}
