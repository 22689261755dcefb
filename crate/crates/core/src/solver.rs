//! Welfare objective, allocations and the black-box welfare maximizers.

use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;

use num_traits::{One, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::rational::{self, Rational};
use crate::valuation::{ItemSet, PublicValuation};

/// Default cap on the number of assignments the exact solver will scan.
pub const DEFAULT_EXACT_BUDGET: u64 = 10_000_000;

/// An ordered partition of all `m` items into `n` (possibly empty) parts.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Allocation {
    parts: Vec<ItemSet>,
}

impl Allocation {
    pub fn new(parts: Vec<ItemSet>, m: usize) -> Result<Self> {
        if parts.is_empty() {
            return invalid("allocation needs at least one part");
        }
        let mut owner = vec![false; m];
        for part in &parts {
            part.check_within(m)?;
            for j in part.iter() {
                if std::mem::replace(&mut owner[j], true) {
                    return invalid(format!("item {j} appears in two parts"));
                }
            }
        }
        if let Some(j) = owner.iter().position(|&x| !x) {
            return invalid(format!("item {j} is not allocated"));
        }
        Ok(Self { parts })
    }

    /// Builds the allocation giving item `j` to agent `agent_of_item[j]`.
    pub fn from_assignment(agent_of_item: &[usize], n: usize) -> Result<Self> {
        let mut parts = vec![ItemSet::new(); n];
        for (j, &i) in agent_of_item.iter().enumerate() {
            if i >= n {
                return invalid(format!("item {j} assigned to agent {i} of {n}"));
            }
            parts[i].insert(j);
        }
        if n == 0 {
            return invalid("allocation needs at least one part");
        }
        Ok(Self { parts })
    }

    /// `n` empty parts; only valid for an empty item universe, or as the
    /// degenerate outcome where nothing is sold.
    pub fn empty(n: usize) -> Self {
        Self {
            parts: vec![ItemSet::new(); n],
        }
    }

    pub fn parts(&self) -> &[ItemSet] {
        &self.parts
    }

    pub fn part(&self, i: usize) -> &ItemSet {
        &self.parts[i]
    }

    pub fn num_parts(&self) -> usize {
        self.parts.len()
    }

    /// Part `k` of the result is part `order[k]` of `self`.
    pub fn reordered(&self, order: &[usize]) -> Self {
        Self {
            parts: order.iter().map(|&k| self.parts[k].clone()).collect(),
        }
    }
}

impl fmt::Display for Allocation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.parts.iter().map(|p| p.to_string()).collect();
        write!(f, "({})", parts.join(", "))
    }
}

pub fn part_values(f: &dyn PublicValuation, s: &Allocation) -> Result<Vec<Rational>> {
    s.parts().iter().map(|p| f.value(p)).collect()
}

/// `Σ_i v_i x_i`.
pub fn dot(v: &[Rational], values: &[Rational]) -> Rational {
    v.iter()
        .zip(values)
        .fold(Rational::zero(), |acc, (a, b)| acc + a * b)
}

/// `f(v, S) = Σ_i v_i f(S_i)`.
pub fn welfare(f: &dyn PublicValuation, v: &[Rational], s: &Allocation) -> Result<Rational> {
    if v.len() != s.num_parts() {
        return invalid(format!(
            "{} multipliers for an allocation with {} parts",
            v.len(),
            s.num_parts()
        ));
    }
    Ok(dot(v, &part_values(f, s)?))
}

/// Stable permutation of the parts so that `f(S_1) >= ... >= f(S_n)`.
pub fn sort_allocation(f: &dyn PublicValuation, s: &Allocation) -> Result<Allocation> {
    Ok(sort_with_values(f, s)?.0)
}

/// Like [`sort_allocation`], also returning the sorted part values.
pub fn sort_with_values(
    f: &dyn PublicValuation,
    s: &Allocation,
) -> Result<(Allocation, Vec<Rational>)> {
    let values = part_values(f, s)?;
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&x, &y| values[y].cmp(&values[x]));
    let sorted_values = order.iter().map(|&k| values[k].clone()).collect();
    Ok((s.reordered(&order), sorted_values))
}

/// Output of a black-box solver.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SolverResult {
    /// Part `i` goes to the agent holding multiplier `v_i`.
    pub assignment: Allocation,
    /// `assignment` with parts sorted by non-increasing value.
    pub allocation: Allocation,
    /// Approximation guarantee of the algorithm (metadata).
    pub guarantee_alpha: Rational,
}

impl SolverResult {
    fn new(f: &dyn PublicValuation, assignment: Allocation, alpha: Rational) -> Result<Self> {
        let allocation = sort_allocation(f, &assignment)?;
        Ok(Self {
            assignment,
            allocation,
            guarantee_alpha: alpha,
        })
    }
}

/// A (possibly non-monotone) welfare maximizer `B(v)`.
pub trait WelfareSolver: Send + Sync {
    /// Stable identifier, part of range cache keys.
    fn id(&self) -> String;

    fn solve(&self, f: &dyn PublicValuation, v: &[Rational]) -> Result<SolverResult>;
}

/// Brute force over all `n^m` agent assignments.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ExactSolver {
    pub budget: u64,
}

impl Default for ExactSolver {
    fn default() -> Self {
        Self {
            budget: DEFAULT_EXACT_BUDGET,
        }
    }
}

impl ExactSolver {
    pub fn with_budget(budget: u64) -> Self {
        Self { budget }
    }

    fn check_budget(&self, n: usize, m: usize) -> Result<()> {
        let states = (n as u64).checked_pow(m as u32);
        match states {
            Some(s) if s <= self.budget => Ok(()),
            _ => Err(Error::ResourceLimit(format!(
                "exact solver needs {n}^{m} assignments, budget is {}",
                self.budget
            ))),
        }
    }
}

impl WelfareSolver for ExactSolver {
    fn id(&self) -> String {
        format!("exact:{}", self.budget)
    }

    /// Maximizer with the lexicographically smallest item-to-agent string.
    fn solve(&self, f: &dyn PublicValuation, v: &[Rational]) -> Result<SolverResult> {
        let n = v.len();
        let m = f.num_items();
        if n == 0 {
            return invalid("no agents");
        }
        self.check_budget(n, m)?;
        if n == 1 {
            let only = Allocation::from_assignment(&vec![0; m], 1)?;
            return SolverResult::new(f, only, Rational::one());
        }

        // n >= 2 within budget keeps m well below 64.
        let mut memo: HashMap<u64, Rational> = HashMap::new();
        let mut value_of = |mask: u64| -> Result<Rational> {
            if let Some(x) = memo.get(&mask) {
                return Ok(x.clone());
            }
            let x = f.value(&ItemSet::from_mask(mask))?;
            memo.insert(mask, x.clone());
            Ok(x)
        };

        let mut assign = vec![0usize; m];
        let mut best: Option<(Rational, Vec<usize>)> = None;
        loop {
            let mut masks = vec![0u64; n];
            for (j, &i) in assign.iter().enumerate() {
                masks[i] |= 1 << j;
            }
            let mut total = Rational::zero();
            for (i, &mask) in masks.iter().enumerate() {
                if !v[i].is_zero() {
                    total += &v[i] * value_of(mask)?;
                }
            }
            if best.as_ref().is_none_or(|(w, _)| total > *w) {
                best = Some((total, assign.clone()));
            }
            // Odometer with the last item fastest: lexicographic order.
            let mut pos = m;
            loop {
                if pos == 0 {
                    let (_, arg) = best.expect("at least one assignment");
                    let alloc = Allocation::from_assignment(&arg, n)?;
                    return SolverResult::new(f, alloc, Rational::one());
                }
                pos -= 1;
                assign[pos] += 1;
                if assign[pos] < n {
                    break;
                }
                assign[pos] = 0;
            }
        }
    }
}

/// Repeatedly gives the item with the largest weighted marginal gain
/// `v_i (f(S_i + j) - f(S_i))` to its agent; ties go to the lower agent,
/// then the lower item.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct GreedySolver;

impl WelfareSolver for GreedySolver {
    fn id(&self) -> String {
        "greedy".into()
    }

    fn solve(&self, f: &dyn PublicValuation, v: &[Rational]) -> Result<SolverResult> {
        let n = v.len();
        let m = f.num_items();
        if n == 0 {
            return invalid("no agents");
        }
        let mut parts = vec![ItemSet::new(); n];
        let mut current: Vec<Rational> = parts.iter().map(|p| f.value(p)).collect::<Result<_>>()?;
        let mut free = vec![true; m];
        for _ in 0..m {
            let mut best: Option<(Rational, usize, usize, Rational)> = None;
            for i in 0..n {
                for j in (0..m).filter(|&j| free[j]) {
                    let extended = f.value(&parts[i].with(j))?;
                    let gain = &v[i] * (&extended - &current[i]);
                    if best.as_ref().is_none_or(|(g, ..)| gain > *g) {
                        best = Some((gain, i, j, extended));
                    }
                }
            }
            let (_, i, j, extended) = best.expect("an unallocated item remains");
            parts[i].insert(j);
            current[i] = extended;
            free[j] = false;
        }
        SolverResult::new(f, Allocation { parts }, rational::ratio(1, 2))
    }
}

pub fn exact_solver(f: &dyn PublicValuation, v: &[Rational]) -> Result<SolverResult> {
    ExactSolver::default().solve(f, v)
}

pub fn greedy_solver(f: &dyn PublicValuation, v: &[Rational]) -> Result<SolverResult> {
    GreedySolver.solve(f, v)
}

/// Built-in solver selector.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SolverKind {
    Exact,
    Greedy,
}

impl SolverKind {
    pub fn build(self) -> Box<dyn WelfareSolver> {
        match self {
            SolverKind::Exact => Box::new(ExactSolver::default()),
            SolverKind::Greedy => Box::new(GreedySolver),
        }
    }
}

impl FromStr for SolverKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "exact" => Ok(SolverKind::Exact),
            "greedy" => Ok(SolverKind::Greedy),
            other => invalid(format!("unknown solver {other:?}")),
        }
    }
}
