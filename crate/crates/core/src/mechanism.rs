//! Maximal-in-range mechanisms: a fixed, bid-independent range of sorted
//! allocations, welfare-maximizing selection over it, and VCG payments.
//!
//! A stored entry is a sorted allocation; the mechanism may hand its parts
//! to the agents in any order. Selection and payments therefore optimize over
//! the permutation closure of the stored entries, which for non-negative bids
//! reduces to pairing bids sorted descending with the sorted part values.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt;
use std::str::FromStr;
use std::sync::{Arc, Mutex, OnceLock};

use num_bigint::BigInt;
use num_traits::{One, Signed, Zero};
use rayon::prelude::*;
use serde::{Serialize, Serializer};
use sha2::{Digest, Sha256};

use crate::error::{invalid, Error, Result};
use crate::rational::{self, Rational};
use crate::solver::{dot, Allocation, WelfareSolver};
use crate::valuation::{ItemSet, PublicValuation};
use crate::vector::{prefix_vector, sort_agents, AgentOrdering, MechanismParams, MultiplierVector};

/// Default cap on the enumeration bound `(⌈log_a n⌉ + 2)^|Q|`.
pub const DEFAULT_ENUMERATION_BUDGET: u128 = 10_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Mode {
    /// Range built from the `n` flat prefix vectors.
    Simple,
    /// Range built from all floor/core staircases.
    VectorFitting,
}

impl Mode {
    pub fn as_str(self) -> &'static str {
        match self {
            Mode::Simple => "simple",
            Mode::VectorFitting => "vector_fitting",
        }
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Mode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "simple" => Ok(Mode::Simple),
            "vector_fitting" | "vector-fitting" => Ok(Mode::VectorFitting),
            other => invalid(format!("unknown mode {other:?}")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct RangeEntry {
    pub source: MultiplierVector,
    pub allocation: Allocation,
    #[serde(with = "rational::serde_vec")]
    pub part_values: Vec<Rational>,
}

/// Ordered, immutable set of range entries for `n` agents.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Range {
    #[serde(skip)]
    n: usize,
    #[serde(flatten)]
    entries: RangeEntries,
}

#[derive(Debug, Clone, PartialEq, Eq)]
struct RangeEntries(Vec<RangeEntry>);

impl Serialize for RangeEntries {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        self.0.serialize(s)
    }
}

impl Range {
    fn from_sources(
        f: &dyn PublicValuation,
        sources: Vec<MultiplierVector>,
        solver: &dyn WelfareSolver,
        n: usize,
    ) -> Result<Self> {
        let entries = sources
            .into_par_iter()
            .map(|source| {
                let out = solver.solve(f, source.entries())?;
                let part_values = crate::solver::part_values(f, &out.allocation)?;
                Ok(RangeEntry {
                    source,
                    allocation: out.allocation,
                    part_values,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            n,
            entries: RangeEntries(entries),
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn entries(&self) -> &[RangeEntry] {
        &self.entries.0
    }

    pub fn len(&self) -> usize {
        self.entries.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.0.is_empty()
    }

    /// JSON dump: a list of `{source, allocation, part_values}`.
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.entries.0).expect("range serializes")
    }

    /// Number of distinct allocations among the entries.
    pub fn distinct_allocations(&self) -> usize {
        self.entries()
            .iter()
            .map(|e| &e.allocation)
            .collect::<HashSet<_>>()
            .len()
    }
}

/// Smallest `k >= 0` with `base^k >= n`.
pub fn ceil_log(base: &Rational, n: usize) -> u32 {
    let target = Rational::from_integer(BigInt::from(n));
    let mut power = Rational::one();
    let mut k = 0;
    while power < target {
        power *= base;
        k += 1;
    }
    k
}

/// `(⌈log_a n⌉ + 2)^|Q|`, the size bound on the enumerated vector set.
pub fn enumeration_bound(p: &MechanismParams) -> u128 {
    let base = u128::from(ceil_log(p.a(), p.n())) + 2;
    base.saturating_pow(p.heights().len() as u32)
}

/// Every staircase whose explicit steps have strictly decreasing heights
/// from `Q` and widths `⌈a^k⌉`, closed off by an even residual step.
///
/// This contains the core of the floor of every multiplier vector. Output
/// order is the depth-first enumeration order; duplicates are dropped.
pub fn enumerate_core_vectors(p: &MechanismParams) -> Result<Vec<MultiplierVector>> {
    enumerate_core_vectors_within(p, DEFAULT_ENUMERATION_BUDGET)
}

pub fn enumerate_core_vectors_within(
    p: &MechanismParams,
    budget: u128,
) -> Result<Vec<MultiplierVector>> {
    let bound = enumeration_bound(p);
    if bound > budget {
        return Err(Error::ResourceLimit(format!(
            "vector enumeration bound (⌈log_a n⌉+2)^|Q| = {bound} exceeds budget {budget}"
        )));
    }
    let mut walk = Enumeration {
        p,
        prefix: Vec::new(),
        out: Vec::new(),
        seen: HashSet::new(),
    };
    walk.visit(0, 0, &Rational::zero());
    Ok(walk.out)
}

struct Enumeration<'a> {
    p: &'a MechanismParams,
    prefix: Vec<(Rational, usize)>,
    out: Vec<MultiplierVector>,
    seen: HashSet<MultiplierVector>,
}

impl Enumeration<'_> {
    fn visit(&mut self, next_height: usize, width: usize, mass: &Rational) {
        let n = self.p.n();
        if width == n {
            if mass.is_one() {
                self.emit(None);
            }
        } else {
            let r = (Rational::one() - mass) / Rational::from_integer(BigInt::from(n - width));
            let below_last = self.prefix.last().is_none_or(|(h, _)| r < *h);
            if !r.is_negative() && below_last {
                self.emit(Some(r));
            }
        }
        for hi in next_height..self.p.heights().len() {
            let h = self.p.heights()[hi].clone();
            for &w in self.p.widths() {
                if width + w > n {
                    break;
                }
                let next_mass = mass + &h * Rational::from_integer(BigInt::from(w));
                if next_mass > Rational::one() {
                    break;
                }
                self.prefix.push((h.clone(), w));
                self.visit(hi + 1, width + w, &next_mass);
                self.prefix.pop();
            }
        }
    }

    fn emit(&mut self, residual: Option<Rational>) {
        let n = self.p.n();
        let mut entries = Vec::with_capacity(n);
        for (h, w) in &self.prefix {
            entries.resize(entries.len() + w, h.clone());
        }
        if let Some(r) = residual {
            entries.resize(n, r);
        }
        let v = MultiplierVector::new(entries).expect("enumerated staircase is valid");
        if self.seen.insert(v.clone()) {
            self.out.push(v);
        }
    }
}

/// Range from the prefix vectors `u^1, ..., u^n`.
pub fn build_simple_range(
    f: &dyn PublicValuation,
    n: usize,
    solver: &dyn WelfareSolver,
) -> Result<Range> {
    if n == 0 {
        return invalid("need at least one agent");
    }
    let sources = (1..=n)
        .map(|j| prefix_vector(j, n))
        .collect::<Result<Vec<_>>>()?;
    Range::from_sources(f, sources, solver, n)
}

/// Range from the enumerated floor/core staircases.
pub fn build_range(
    f: &dyn PublicValuation,
    p: &MechanismParams,
    solver: &dyn WelfareSolver,
) -> Result<Range> {
    let sources = enumerate_core_vectors(p)?;
    Range::from_sources(f, sources, solver, p.n())
}

pub fn build_range_for_mode(
    f: &dyn PublicValuation,
    p: &MechanismParams,
    solver: &dyn WelfareSolver,
    mode: Mode,
) -> Result<Range> {
    match mode {
        Mode::Simple => build_simple_range(f, p.n(), solver),
        Mode::VectorFitting => build_range(f, p, solver),
    }
}

/// Allocation chosen from the range, before payments.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Selection {
    pub chosen_entry: usize,
    pub ordering: AgentOrdering,
    /// Part of the chosen entry received by each original agent.
    pub assignment: Vec<ItemSet>,
    /// `f(S_i)` for each original agent.
    pub values: Vec<Rational>,
    /// Declared welfare in raw bid units.
    pub welfare: Rational,
}

fn check_bids(range: &Range, bids: &[Rational]) -> Result<()> {
    if range.is_empty() {
        return invalid("empty range");
    }
    if bids.len() != range.n() {
        return invalid(format!(
            "{} bids for a range built for {} agents",
            bids.len(),
            range.n()
        ));
    }
    if bids.iter().any(|b| b.is_negative()) {
        return invalid("bids must be non-negative");
    }
    Ok(())
}

/// Entry index maximizing `Σ_k w_k · part_values[k]` for bids already
/// sorted descending; lowest index wins ties.
fn best_entry(range: &Range, sorted_bids: &[Rational]) -> (usize, Rational) {
    let mut best: Option<(usize, Rational)> = None;
    for (idx, e) in range.entries().iter().enumerate() {
        let value = dot(sorted_bids, &e.part_values);
        if best.as_ref().is_none_or(|(_, b)| value > *b) {
            best = Some((idx, value));
        }
    }
    best.expect("range is non-empty")
}

/// Welfare-maximizing member of the (permutation-closed) range.
///
/// Fails with [`Error::Degenerate`] when every bid is zero.
pub fn select(range: &Range, bids: &[Rational]) -> Result<Selection> {
    check_bids(range, bids)?;
    if bids.iter().all(Zero::is_zero) {
        return Err(Error::Degenerate("all bids are zero".into()));
    }
    let ordering = sort_agents(bids);
    let sorted: Vec<Rational> = ordering.as_slice().iter().map(|&a| bids[a].clone()).collect();
    let (chosen_entry, welfare) = best_entry(range, &sorted);
    let entry = &range.entries()[chosen_entry];
    let n = range.n();
    let mut assignment = vec![ItemSet::new(); n];
    let mut values = vec![Rational::zero(); n];
    for pos in 0..n {
        let agent = ordering.agent_at(pos);
        assignment[agent] = entry.allocation.part(pos).clone();
        values[agent] = entry.part_values[pos].clone();
    }
    Ok(Selection {
        chosen_entry,
        ordering,
        assignment,
        values,
        welfare,
    })
}

/// Clarke pivot payments over the same permutation-closed range.
pub fn vcg_payments(range: &Range, bids: &[Rational], chosen: &Selection) -> Result<Vec<Rational>> {
    check_bids(range, bids)?;
    let sorted: Vec<Rational> = chosen
        .ordering
        .as_slice()
        .iter()
        .map(|&a| bids[a].clone())
        .collect();
    let mut payments = Vec::with_capacity(bids.len());
    for (agent, bid) in bids.iter().enumerate() {
        let pos = chosen.ordering.position_of(agent);
        let others: Vec<Rational> = sorted
            .iter()
            .enumerate()
            .filter(|&(k, _)| k != pos)
            .map(|(_, b)| b.clone())
            .collect();
        // Others keep their descending order; the removed agent takes the
        // smallest part.
        let (_, without_me) = best_entry(range, &others);
        let others_now = &chosen.welfare - bid * &chosen.values[agent];
        let p = without_me - others_now;
        debug_assert!(!p.is_negative(), "negative VCG payment");
        payments.push(p);
    }
    Ok(payments)
}

fn serialize_assignment<S: Serializer>(
    a: &[ItemSet],
    s: S,
) -> std::result::Result<S::Ok, S::Error> {
    a.iter()
        .enumerate()
        .collect::<BTreeMap<usize, &ItemSet>>()
        .serialize(s)
}

fn serialize_entry<S: Serializer>(e: &Option<usize>, s: S) -> std::result::Result<S::Ok, S::Error> {
    e.serialize(s)
}

/// Allocation and payments. `chosen_entry` is `None` for the degenerate
/// all-zero bid profile, where nothing is sold and nobody pays.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Outcome {
    #[serde(serialize_with = "serialize_assignment")]
    pub assignment: Vec<ItemSet>,
    #[serde(with = "rational::serde_vec")]
    pub payments: Vec<Rational>,
    #[serde(with = "rational::serde_str")]
    pub welfare: Rational,
    #[serde(serialize_with = "serialize_entry")]
    pub chosen_entry: Option<usize>,
    #[serde(skip)]
    pub ordering: AgentOrdering,
    #[serde(skip)]
    pub values: Vec<Rational>,
}

impl Outcome {
    pub fn degenerate(n: usize) -> Self {
        Self {
            assignment: vec![ItemSet::new(); n],
            payments: vec![Rational::zero(); n],
            welfare: Rational::zero(),
            chosen_entry: None,
            ordering: AgentOrdering::identity(n),
            values: vec![Rational::zero(); n],
        }
    }

    /// `true_value · f(S_i) - p_i`.
    pub fn utility(&self, agent: usize, true_value: &Rational) -> Rational {
        true_value * &self.values[agent] - &self.payments[agent]
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("outcome serializes")
    }
}

/// Select and charge on a prebuilt range.
pub fn run_on_range(range: &Range, bids: &[Rational]) -> Result<Outcome> {
    match select(range, bids) {
        Ok(sel) => {
            let payments = vcg_payments(range, bids, &sel)?;
            Ok(Outcome {
                assignment: sel.assignment,
                payments,
                welfare: sel.welfare,
                chosen_entry: Some(sel.chosen_entry),
                ordering: sel.ordering,
                values: sel.values,
            })
        }
        Err(Error::Degenerate(_)) => Ok(Outcome::degenerate(bids.len())),
        Err(e) => Err(e),
    }
}

/// Memo of built ranges keyed by a SHA-256 digest of the oracle
/// description, `n`, `a`, `b`, solver id and mode.
#[derive(Default)]
pub struct RangeCache {
    ranges: Mutex<HashMap<String, Arc<Range>>>,
}

impl RangeCache {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn key(
        f: &dyn PublicValuation,
        p: &MechanismParams,
        solver: &dyn WelfareSolver,
        mode: Mode,
    ) -> String {
        let text = format!(
            "{}|n={}|a={}|b={}|solver={}|mode={}",
            f.describe(),
            p.n(),
            rational::format(p.a()),
            rational::format(p.b()),
            solver.id(),
            mode
        );
        Sha256::digest(text.as_bytes())
            .iter()
            .map(|b| format!("{b:02x}"))
            .collect()
    }

    pub fn get_or_build(
        &self,
        f: &dyn PublicValuation,
        p: &MechanismParams,
        solver: &dyn WelfareSolver,
        mode: Mode,
    ) -> Result<Arc<Range>> {
        let key = Self::key(f, p, solver, mode);
        if let Some(r) = self.ranges.lock().expect("cache lock").get(&key) {
            return Ok(Arc::clone(r));
        }
        let range = Arc::new(build_range_for_mode(f, p, solver, mode)?);
        let mut map = self.ranges.lock().expect("cache lock");
        Ok(Arc::clone(map.entry(key).or_insert(range)))
    }

    pub fn len(&self) -> usize {
        self.ranges.lock().expect("cache lock").len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

fn global_cache() -> &'static RangeCache {
    static CACHE: OnceLock<RangeCache> = OnceLock::new();
    CACHE.get_or_init(RangeCache::new)
}

/// Builds (or reuses) the range for `(f, params, solver, mode)`, then selects
/// and charges for `bids`. Welfare and payments are in raw bid units.
pub fn run_mechanism(
    f: &dyn PublicValuation,
    params: &MechanismParams,
    solver: &dyn WelfareSolver,
    mode: Mode,
    bids: &[Rational],
) -> Result<Outcome> {
    if bids.len() != params.n() {
        return invalid(format!(
            "{} bids but parameters are for n = {}",
            bids.len(),
            params.n()
        ));
    }
    let range = global_cache().get_or_build(f, params, solver, mode)?;
    run_on_range(&range, bids)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instance::three_slot_example;
    use crate::rational::{int, ratio};
    use crate::solver::{ExactSolver, GreedySolver};
    use crate::valuation::AdditiveValuation;

    fn set(items: &[usize]) -> ItemSet {
        items.iter().copied().collect()
    }

    fn mv(xs: &[(i64, i64)]) -> MultiplierVector {
        MultiplierVector::new(xs.iter().map(|&(a, b)| ratio(a, b)).collect()).unwrap()
    }

    #[test]
    fn enumeration_n4() {
        let p = MechanismParams::binary(4).unwrap();
        let u = enumerate_core_vectors(&p).unwrap();
        assert_eq!(u[0], MultiplierVector::uniform(4).unwrap());
        assert!(u.contains(&mv(&[(1, 2), (1, 6), (1, 6), (1, 6)])));
        assert!(u.contains(&mv(&[(1, 1), (0, 1), (0, 1), (0, 1)])));
        assert!(u.contains(&mv(&[(1, 2), (1, 2), (0, 1), (0, 1)])));
        // Prefix grid: heights {1, 1/2}, widths {1, 2, 4}; the valid staircases
        // are uniform, [1|1]+0, [1/2|1]+1/6, [1/2|2]+0.
        assert_eq!(u.len(), 4);
        assert!((u.len() as u128) <= enumeration_bound(&p));
    }

    #[test]
    fn enumeration_n1() {
        let p = MechanismParams::binary(1).unwrap();
        let u = enumerate_core_vectors(&p).unwrap();
        assert_eq!(u, vec![mv(&[(1, 1)])]);
    }

    #[test]
    fn enumeration_budget() {
        let p = MechanismParams::binary(16).unwrap();
        // (4 + 2)^4
        assert_eq!(enumeration_bound(&p), 1296);
        let err = enumerate_core_vectors_within(&p, 1000);
        assert!(matches!(err, Err(Error::ResourceLimit(msg)) if msg.contains("1296")));
    }

    #[test]
    fn simple_range_shape() {
        let f = AdditiveValuation::new(vec![int(1), int(2), int(3)]);
        let r = build_simple_range(&f, 3, &ExactSolver::default()).unwrap();
        assert_eq!(r.len(), 3);
        assert_eq!(r.entries()[2].source, MultiplierVector::uniform(3).unwrap());
        for e in r.entries() {
            assert!(e.part_values.windows(2).all(|w| w[0] >= w[1]));
        }
        let r1 = build_simple_range(&f, 1, &ExactSolver::default()).unwrap();
        assert_eq!(r1.len(), 1);
        assert_eq!(r1.entries()[0].part_values, vec![int(6)]);
    }

    #[test]
    fn simple_range_uniform_entry_is_optimal_split() {
        // u^3 = (1/3, 1/3, 1/3) with additive f: any partition has Σ f(S_i)/3 = 2.
        let f = AdditiveValuation::new(vec![int(1), int(2), int(3)]);
        let r = build_simple_range(&f, 3, &ExactSolver::default()).unwrap();
        let e = &r.entries()[2];
        assert_eq!(dot(e.source.entries(), &e.part_values), int(2));
    }

    #[test]
    fn three_slot_vector_fitting_selection_and_payments() {
        let f = three_slot_example();
        let p = MechanismParams::binary(2).unwrap();
        let r = build_range(&f, &p, &ExactSolver::default()).unwrap();
        assert_eq!(r.len(), 2);
        let bids = [int(1), int(1)];
        let sel = select(&r, &bids).unwrap();
        assert_eq!(sel.welfare, int(16));
        assert_eq!(sel.chosen_entry, 0);
        assert_eq!(sel.assignment, vec![set(&[0, 1]), set(&[2])]);
        let pay = vcg_payments(&r, &bids, &sel).unwrap();
        // Without agent 0, agent 1 alone could get value 10 but holds 6.
        assert_eq!(pay, vec![int(4), int(0)]);
    }

    #[test]
    fn selection_is_scale_invariant() {
        let f = three_slot_example();
        let p = MechanismParams::binary(3).unwrap();
        let r = build_range(&f, &p, &GreedySolver).unwrap();
        let w = [ratio(3, 5), int(2), ratio(1, 7)];
        let scaled: Vec<Rational> = w.iter().map(|x| x * ratio(7, 3)).collect();
        let a = select(&r, &w).unwrap();
        let b = select(&r, &scaled).unwrap();
        assert_eq!(a.chosen_entry, b.chosen_entry);
        assert_eq!(a.assignment, b.assignment);
        assert_eq!(&a.welfare * ratio(7, 3), b.welfare);
    }

    #[test]
    fn single_entry_range_always_chosen() {
        let f = three_slot_example();
        let r = build_simple_range(&f, 1, &ExactSolver::default()).unwrap();
        let out = run_on_range(&r, &[ratio(5, 2)]).unwrap();
        assert_eq!(out.chosen_entry, Some(0));
        assert_eq!(out.payments, vec![int(0)]);
        assert_eq!(out.welfare, int(25));
    }

    #[test]
    fn zero_bid_agent_pays_nothing() {
        let f = three_slot_example();
        let p = MechanismParams::binary(3).unwrap();
        let r = build_range(&f, &p, &ExactSolver::default()).unwrap();
        let out = run_on_range(&r, &[int(2), int(0), int(1)]).unwrap();
        assert_eq!(out.payments[1], int(0));
    }

    #[test]
    fn degenerate_bids_give_empty_outcome() {
        let f = three_slot_example();
        let p = MechanismParams::binary(2).unwrap();
        let out = run_mechanism(&f, &p, &ExactSolver::default(), Mode::VectorFitting, &[int(0), int(0)])
            .unwrap();
        assert_eq!(out, Outcome::degenerate(2));
        assert!(out.to_json().contains("\"chosen_entry\": null"));
    }

    #[test]
    fn bid_count_must_match() {
        let f = three_slot_example();
        let p = MechanismParams::binary(2).unwrap();
        assert!(run_mechanism(&f, &p, &GreedySolver, Mode::Simple, &[int(1)]).is_err());
        let r = build_simple_range(&f, 2, &GreedySolver).unwrap();
        assert!(select(&r, &[int(1), int(-1)]).is_err());
    }

    #[test]
    fn cache_reuses_ranges() {
        let f = three_slot_example();
        let p = MechanismParams::binary(2).unwrap();
        let cache = RangeCache::new();
        let a = cache.get_or_build(&f, &p, &GreedySolver, Mode::Simple).unwrap();
        let b = cache.get_or_build(&f, &p, &GreedySolver, Mode::Simple).unwrap();
        assert!(Arc::ptr_eq(&a, &b));
        cache.get_or_build(&f, &p, &GreedySolver, Mode::VectorFitting).unwrap();
        assert_eq!(cache.len(), 2);
    }

    #[test]
    fn outcome_json_shape() {
        let f = three_slot_example();
        let p = MechanismParams::binary(2).unwrap();
        let out = run_mechanism(&f, &p, &ExactSolver::default(), Mode::VectorFitting, &[int(1), ratio(11, 10)])
            .unwrap();
        let json: serde_json::Value = serde_json::from_str(&out.to_json()).unwrap();
        // The higher bidder gets the 10-viewer part: 11/10 * 10 + 6 >= 83/5.
        assert_eq!(json["welfare"], "17/1");
        assert_eq!(json["assignment"]["1"], serde_json::json!([0, 1]));
        assert_eq!(json["assignment"]["0"], serde_json::json!([2]));
        assert_eq!(json["chosen_entry"], 0);
        assert_eq!(json["payments"], serde_json::json!(["0/1", "4/1"]));
    }

    #[test]
    fn mode_parses() {
        assert_eq!("vector_fitting".parse::<Mode>().unwrap(), Mode::VectorFitting);
        assert_eq!("simple".parse::<Mode>().unwrap(), Mode::Simple);
        assert!("vcg".parse::<Mode>().is_err());
    }
}
