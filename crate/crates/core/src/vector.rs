//! Multiplier vectors and the two discretizations used to build the range:
//! the floor (heights rounded down onto powers of `1/b`) and the core (step
//! widths rounded down onto `⌈a^k⌉`).
//!
//! Indices are 0-based throughout; the `j` arguments of [`prefix_vector`] and
//! [`normalized_prefix`] count entries and are 1-based.

use std::fmt;

use num_bigint::BigInt;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::{Deserialize, Deserializer, Serialize};

use crate::error::{invalid, Error, Result};
use crate::rational::{self, Rational};

/// Non-increasing, non-negative vector of rationals summing to exactly one.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(transparent)]
pub struct MultiplierVector(#[serde(with = "rational::serde_vec")] Vec<Rational>);

impl MultiplierVector {
    pub fn new(entries: Vec<Rational>) -> Result<Self> {
        if entries.is_empty() {
            return invalid("multiplier vector must have at least one entry");
        }
        if entries.iter().any(|x| x.is_negative()) {
            return invalid("multiplier vector has a negative entry");
        }
        if entries.windows(2).any(|w| w[0] < w[1]) {
            return invalid("multiplier vector entries must be non-increasing");
        }
        if !rational::sum(&entries).is_one() {
            return invalid("multiplier vector entries must sum to 1");
        }
        Ok(Self(entries))
    }

    /// Skips validation; callers guarantee the invariants.
    fn from_trusted(entries: Vec<Rational>) -> Self {
        debug_assert!(Self::new(entries.clone()).is_ok(), "{entries:?}");
        Self(entries)
    }

    pub fn uniform(n: usize) -> Result<Self> {
        if n == 0 {
            return invalid("uniform vector needs n >= 1");
        }
        Ok(Self(vec![rational::ratio(1, n as i64); n]))
    }

    pub fn entries(&self) -> &[Rational] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn into_entries(self) -> Vec<Rational> {
        self.0
    }
}

impl<'de> Deserialize<'de> for MultiplierVector {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let entries = rational::serde_vec::deserialize(d)?;
        MultiplierVector::new(entries).map_err(serde::de::Error::custom)
    }
}

impl fmt::Display for MultiplierVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let cells: Vec<String> = self.0.iter().map(|x| x.to_string()).collect();
        write!(f, "({})", cells.join(", "))
    }
}

/// Permutation from sorted position to original agent index.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct AgentOrdering(Vec<usize>);

impl AgentOrdering {
    pub fn new(perm: Vec<usize>) -> Result<Self> {
        let mut seen = vec![false; perm.len()];
        for &a in &perm {
            if a >= perm.len() || std::mem::replace(&mut seen[a], true) {
                return invalid(format!("{perm:?} is not a permutation"));
            }
        }
        Ok(Self(perm))
    }

    pub fn identity(n: usize) -> Self {
        Self((0..n).collect())
    }

    /// Original agent at sorted position `pos`.
    pub fn agent_at(&self, pos: usize) -> usize {
        self.0[pos]
    }

    /// Sorted position of original agent `agent`.
    pub fn position_of(&self, agent: usize) -> usize {
        self.0
            .iter()
            .position(|&a| a == agent)
            .expect("agent in ordering")
    }

    pub fn as_slice(&self) -> &[usize] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// Order agents by descending bid; equal bids keep their input order.
pub fn sort_agents(bids: &[Rational]) -> AgentOrdering {
    let mut perm: Vec<usize> = (0..bids.len()).collect();
    perm.sort_by(|&x, &y| bids[y].cmp(&bids[x]));
    AgentOrdering(perm)
}

/// Sorts and rescales raw bids into canonical form.
///
/// Returns the canonical vector, the ordering used to sort it, and the scale
/// (total bid), so that `bids[ordering.agent_at(k)] == scale * v[k]`.
pub fn normalize(bids: &[Rational]) -> Result<(MultiplierVector, AgentOrdering, Rational)> {
    if bids.is_empty() {
        return invalid("no bids");
    }
    if bids.iter().any(|b| b.is_negative()) {
        return invalid("bids must be non-negative");
    }
    let scale = rational::sum(bids);
    if scale.is_zero() {
        return Err(Error::Degenerate("all bids are zero".into()));
    }
    let ordering = sort_agents(bids);
    let entries = ordering
        .as_slice()
        .iter()
        .map(|&a| &bids[a] / &scale)
        .collect();
    Ok((MultiplierVector::from_trusted(entries), ordering, scale))
}

/// Mechanism parameters `a, b > 1` for `n` agents, with the derived height
/// grid `Q` and the admissible step widths.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MechanismParams {
    a: Rational,
    b: Rational,
    n: usize,
    /// `b^0 > b^-1 > ... > b^-(K-1)`, `K = max(1, ⌈log_b n⌉)`.
    heights: Vec<Rational>,
    /// Distinct `⌈a^k⌉ <= n`, ascending.
    widths: Vec<usize>,
}

/// Cap on power iterations when tabulating `⌈a^k⌉` or `b^k`.
const MAX_POWER_STEPS: u32 = 4096;

impl MechanismParams {
    pub fn new(a: Rational, b: Rational, n: usize) -> Result<Self> {
        if n == 0 {
            return invalid("need at least one agent");
        }
        if a <= Rational::one() || b <= Rational::one() {
            return invalid(format!("parameters must exceed 1 (a = {a}, b = {b})"));
        }
        let n_big = Rational::from_integer(BigInt::from(n));

        let mut heights = vec![Rational::one()];
        let mut power = b.clone();
        while power < n_big {
            if heights.len() as u32 >= MAX_POWER_STEPS {
                return Err(Error::ResourceLimit(format!("b = {b} is too close to 1")));
            }
            heights.push(power.recip());
            power *= &b;
        }

        let mut widths = vec![1usize];
        let mut power = a.clone();
        let mut steps = 0;
        loop {
            let w = rational::ceil(&power);
            if w > BigInt::from(n) {
                break;
            }
            let w = w.to_usize().expect("width bounded by n");
            if *widths.last().expect("non-empty") != w {
                widths.push(w);
            }
            steps += 1;
            if steps >= MAX_POWER_STEPS {
                return Err(Error::ResourceLimit(format!("a = {a} is too close to 1")));
            }
            power *= &a;
        }

        Ok(Self {
            a,
            b,
            n,
            heights,
            widths,
        })
    }

    /// `a = b = 2`.
    pub fn binary(n: usize) -> Result<Self> {
        Self::new(rational::int(2), rational::int(2), n)
    }

    pub fn a(&self) -> &Rational {
        &self.a
    }

    pub fn b(&self) -> &Rational {
        &self.b
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// The height grid `Q`, descending.
    pub fn heights(&self) -> &[Rational] {
        &self.heights
    }

    /// Smallest height `q`.
    pub fn q(&self) -> &Rational {
        self.heights.last().expect("Q is non-empty")
    }

    pub fn widths(&self) -> &[usize] {
        &self.widths
    }

    /// Largest element of `Q` not exceeding `x`, if any.
    pub fn round_down(&self, x: &Rational) -> Option<&Rational> {
        self.heights.iter().find(|h| *h <= x)
    }

    /// Largest admissible width not exceeding `span` (at least 1).
    pub fn width_at_most(&self, span: usize) -> usize {
        self.widths
            .iter()
            .copied()
            .take_while(|&w| w <= span)
            .last()
            .unwrap_or(1)
    }

    fn check_len(&self, v: &MultiplierVector) -> Result<()> {
        if v.len() != self.n {
            return invalid(format!(
                "vector has {} entries but parameters are for n = {}",
                v.len(),
                self.n
            ));
        }
        Ok(())
    }
}

/// Residual height `(1 - used) / remaining`.
fn residual(used: &Rational, remaining: usize) -> Rational {
    (Rational::one() - used) / Rational::from_integer(BigInt::from(remaining))
}

/// Vertical fitting: round large entries down onto `Q` until the remaining
/// mass has to be spread evenly.
pub fn floor_of(v: &MultiplierVector, p: &MechanismParams) -> Result<MultiplierVector> {
    p.check_len(v)?;
    let n = v.len();
    let q = p.q();
    let mut u: Vec<Rational> = Vec::with_capacity(n);
    let mut used = Rational::zero();
    for (i, vi) in v.entries().iter().enumerate() {
        // minimum permissible value of u_i given the entries fixed so far
        let r = residual(&used, n - i);
        match p.round_down(vi).filter(|h| vi >= q && **h > r) {
            Some(h) => {
                used += h;
                u.push(h.clone());
            }
            None => {
                u.resize(n, r);
                break;
            }
        }
    }
    debug_assert_eq!(u.len(), n);
    Ok(MultiplierVector::from_trusted(u))
}

/// Horizontal fitting: shrink each step to the widest admissible width that
/// fits, until the remaining mass has to be spread evenly.
pub fn core_of(v: &MultiplierVector, p: &MechanismParams) -> Result<MultiplierVector> {
    p.check_len(v)?;
    let n = v.len();
    let entries = v.entries();
    let mut u: Vec<Rational> = Vec::with_capacity(n);
    let mut used = Rational::zero();
    let mut start = 0;
    while start < n {
        let r = residual(&used, n - u.len());
        let height = &entries[start];
        if *height <= r {
            u.resize(n, r);
            break;
        }
        let end = start + entries[start..].iter().take_while(|x| *x == height).count();
        let width = p.width_at_most(end - u.len());
        used += height * Rational::from_integer(BigInt::from(width));
        u.resize(u.len() + width, height.clone());
        start = end;
    }
    // The last step of v always lands in the fill branch.
    debug_assert_eq!(u.len(), n);
    Ok(MultiplierVector::from_trusted(u))
}

/// Whether some split index has `u >= w` on the prefix and `u <= w` on the
/// suffix.
pub fn dominates(u: &MultiplierVector, w: &MultiplierVector) -> Result<bool> {
    dominates_slices(u.entries(), w.entries())
}

pub fn dominates_slices(u: &[Rational], w: &[Rational]) -> Result<bool> {
    if u.len() != w.len() {
        return invalid(format!("length mismatch: {} vs {}", u.len(), w.len()));
    }
    let prefix = u.iter().zip(w).take_while(|(x, y)| x >= y).count();
    let suffix_start = u.len() - u.iter().zip(w).rev().take_while(|(x, y)| x <= y).count();
    Ok(suffix_start <= prefix)
}

/// `(1/j, ..., 1/j, 0, ..., 0)` with `j` leading entries.
pub fn prefix_vector(j: usize, n: usize) -> Result<MultiplierVector> {
    if j == 0 || j > n {
        return invalid(format!("prefix length {j} outside 1..={n}"));
    }
    let mut entries = vec![rational::ratio(1, j as i64); j];
    entries.resize(n, Rational::zero());
    Ok(MultiplierVector::from_trusted(entries))
}

/// The first `j` entries of `v` rescaled to unit mass, zero elsewhere.
pub fn normalized_prefix(v: &MultiplierVector, j: usize) -> Result<MultiplierVector> {
    let n = v.len();
    if j == 0 || j > n {
        return invalid(format!("prefix length {j} outside 1..={n}"));
    }
    let mass = rational::sum(&v.entries()[..j]);
    if mass.is_zero() {
        return Err(Error::Degenerate(format!("prefix of length {j} has zero mass")));
    }
    let mut entries: Vec<Rational> = v.entries()[..j].iter().map(|x| x / &mass).collect();
    entries.resize(n, Rational::zero());
    Ok(MultiplierVector::from_trusted(entries))
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Step {
    pub height: Rational,
    pub width: usize,
}

/// Run-length view of a multiplier vector: maximal runs of equal entries.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Staircase {
    steps: Vec<Step>,
}

impl Staircase {
    pub fn new(steps: Vec<Step>) -> Result<Self> {
        if steps.iter().any(|s| s.width == 0) {
            return invalid("staircase step with zero width");
        }
        if steps.windows(2).any(|w| w[0].height <= w[1].height) {
            return invalid("staircase heights must be strictly decreasing");
        }
        Ok(Self { steps })
    }

    pub fn steps(&self) -> &[Step] {
        &self.steps
    }

    pub fn total_width(&self) -> usize {
        self.steps.iter().map(|s| s.width).sum()
    }

    /// Expands back into a vector of length `n`.
    pub fn to_vector(&self, n: usize) -> Result<MultiplierVector> {
        if self.total_width() != n {
            return invalid(format!(
                "staircase covers {} positions, expected {n}",
                self.total_width()
            ));
        }
        let mut entries = Vec::with_capacity(n);
        for s in &self.steps {
            entries.resize(entries.len() + s.width, s.height.clone());
        }
        MultiplierVector::new(entries)
    }
}

pub fn staircase_of(v: &MultiplierVector) -> Staircase {
    let mut steps: Vec<Step> = Vec::new();
    for x in v.entries() {
        match steps.last_mut() {
            Some(s) if s.height == *x => s.width += 1,
            _ => steps.push(Step {
                height: x.clone(),
                width: 1,
            }),
        }
    }
    Staircase { steps }
}

pub fn vector_of(s: &Staircase, n: usize) -> Result<MultiplierVector> {
    s.to_vector(n)
}
