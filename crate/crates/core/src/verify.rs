//! Executable checks for the structural lemmas, welfare bounds, truthfulness
//! and the greedy counterexample.
//!
//! Every check is deterministic given its seed: trial `t` draws from a
//! ChaCha stream selected by `t`, so trials run in parallel and are merged in
//! trial order.

use std::collections::HashSet;
use std::fmt::Write as _;

use num_traits::{One, Signed, Zero};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Serialize, Serializer};

use crate::error::{Error, Result};
use crate::instance::{three_slot_example, random_coverage, Valuation};
use crate::mechanism::{
    build_range_for_mode, enumerate_core_vectors, run_on_range, Mode, Range,
};
use crate::rational::{self, Rational};
use crate::solver::{
    dot, exact_solver, sort_with_values, welfare, Allocation, ExactSolver, GreedySolver,
    WelfareSolver,
};
use crate::valuation::PublicValuation;
use crate::vector::{core_of, dominates, floor_of, MechanismParams, MultiplierVector};

/// Outcome of one property check. Passes iff `failures` is empty.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct PropertyReport {
    pub property: String,
    pub trials: usize,
    pub failures: Vec<String>,
    #[serde(serialize_with = "serialize_opt_rational")]
    pub min_ratio: Option<Rational>,
}

fn serialize_opt_rational<S: Serializer>(
    r: &Option<Rational>,
    s: S,
) -> std::result::Result<S::Ok, S::Error> {
    r.as_ref().map(rational::format).serialize(s)
}

impl PropertyReport {
    pub fn new(property: impl Into<String>) -> Self {
        Self {
            property: property.into(),
            trials: 0,
            failures: Vec::new(),
            min_ratio: None,
        }
    }

    pub fn passed(&self) -> bool {
        self.failures.is_empty()
    }

    pub fn observe_ratio(&mut self, r: Rational) {
        if self.min_ratio.as_ref().is_none_or(|m| r < *m) {
            self.min_ratio = Some(r);
        }
    }

    pub fn fail(&mut self, msg: impl Into<String>) {
        self.failures.push(msg.into());
    }

    fn absorb(&mut self, other: PropertyReport) {
        self.trials += other.trials;
        self.failures.extend(other.failures);
        if let Some(r) = other.min_ratio {
            self.observe_ratio(r);
        }
    }

    pub fn summary(&self) -> String {
        let ratio = self
            .min_ratio
            .as_ref()
            .map(|r| format!(", min ratio {} (~{:.4})", r, rational::to_f64(r)))
            .unwrap_or_default();
        format!(
            "{}: {} trials, {} failures{}",
            self.property,
            self.trials,
            self.failures.len(),
            ratio
        )
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

fn trial_rng(seed: u64, trial: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(trial as u64);
    rng
}

/// Runs `trials` independent trials in parallel and merges them in order.
fn run_trials<F>(property: &str, trials: usize, seed: u64, body: F) -> PropertyReport
where
    F: Fn(usize, &mut ChaCha8Rng, &mut PropertyReport) + Sync,
{
    let parts: Vec<PropertyReport> = (0..trials)
        .into_par_iter()
        .map(|t| {
            let mut rng = trial_rng(seed, t);
            let mut rep = PropertyReport::new(property);
            rep.trials = 1;
            body(t, &mut rng, &mut rep);
            rep
        })
        .collect();
    let mut report = PropertyReport::new(property);
    for p in parts {
        report.absorb(p);
    }
    report
}

const VECTOR_DENOMINATOR: i64 = 32;

/// Random canonical vector. Even trials draw numerators uniformly from
/// `1..=32`; odd trials cube them, which produces the skewed vectors whose
/// leading entries reach the top of the height grid.
pub fn random_multiplier_vector<R: Rng + ?Sized>(n: usize, rng: &mut R) -> MultiplierVector {
    let skewed = rng.gen_bool(0.5);
    let mut raw: Vec<i64> = (0..n)
        .map(|_| {
            let k = rng.gen_range(1..=VECTOR_DENOMINATOR);
            if skewed {
                k * k * k
            } else {
                k
            }
        })
        .collect();
    raw.sort_unstable_by(|x, y| y.cmp(x));
    let total: i64 = raw.iter().sum();
    MultiplierVector::new(raw.into_iter().map(|x| rational::ratio(x, total)).collect())
        .expect("sorted positive entries normalize")
}

/// Sorted part values of a random allocation of a random coverage
/// function over at most 8 items.
pub fn random_sorted_values<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Vec<Rational> {
    let m = rng.gen_range(1..=8);
    let viewers = rng.gen_range(1..=12);
    let f = random_coverage(m, viewers, rng).expect("positive sizes");
    let assign: Vec<usize> = (0..m).map(|_| rng.gen_range(0..n)).collect();
    let alloc = Allocation::from_assignment(&assign, n).expect("agents in range");
    sort_with_values(&f, &alloc).expect("items in range").1
}

/// Floor lemma `f(⌊v⌋, S) >= 3/(4b) f(v, S)` and core lemma
/// `f(core v, S) >= f(v, S)/a` on random `v` and random sorted `S`.
pub fn check_floor_core_lemmas(
    trials: usize,
    params: &MechanismParams,
    seed: u64,
) -> Result<[PropertyReport; 2]> {
    let n = params.n();
    let floor_factor = rational::int(3) / (rational::int(4) * params.b());
    let core_factor = params.a().recip();
    let check = |name: &str, which: fn(&MultiplierVector, &MechanismParams) -> Result<MultiplierVector>, factor: &Rational, stream: u64| {
        run_trials(name, trials, seed ^ stream, |t, rng, rep| {
            let v = random_multiplier_vector(n, rng);
            let values = random_sorted_values(n, rng);
            let u = match which(&v, params) {
                Ok(u) => u,
                Err(e) => return rep.fail(format!("trial {t}: {e}")),
            };
            let base = dot(v.entries(), &values);
            let fitted = dot(u.entries(), &values);
            if fitted < factor * &base {
                rep.fail(format!("trial {t}: v={v} u={u} values={values:?}"));
            }
            if base.is_positive() {
                rep.observe_ratio(fitted / base);
            }
        })
    };
    let floor = check(&format!("floor-lemma n={n}"), floor_of, &floor_factor, 0xF1);
    let core = check(&format!("core-lemma n={n}"), core_of, &core_factor, 0xC0);
    Ok([floor, core])
}

/// Dominance lemma on `(v, ⌊v⌋)`, `(v, core v)`, `(⌊v⌋, core ⌊v⌋)`,
/// `(v, v)` and on random pairs that happen to be in dominance order.
/// Also checks that every fitted vector is dominated by its input.
pub fn check_dominance_lemma(
    trials: usize,
    params: &MechanismParams,
    seed: u64,
) -> Result<PropertyReport> {
    let n = params.n();
    let report = run_trials(&format!("dominance-lemma n={n}"), trials, seed, |t, rng, rep| {
        let v = random_multiplier_vector(n, rng);
        let values = random_sorted_values(n, rng);
        let (fl, co) = match (floor_of(&v, params), core_of(&v, params)) {
            (Ok(a), Ok(b)) => (a, b),
            _ => return rep.fail(format!("trial {t}: fitting failed for {v}")),
        };
        let co_fl = core_of(&fl, params).expect("floor has length n");
        let other = random_multiplier_vector(n, rng);
        let mut pairs = vec![(&v, &fl, true), (&v, &co, true), (&fl, &co_fl, true), (&v, &v, true)];
        pairs.push((&v, &other, false));
        pairs.push((&other, &v, false));
        for (u, w, must_dominate) in pairs {
            let dom = dominates(u, w).expect("equal lengths");
            if must_dominate && !dom {
                rep.fail(format!("trial {t}: {u} should dominate {w}"));
            }
            if dom {
                let wu = dot(u.entries(), &values);
                let ww = dot(w.entries(), &values);
                if wu < ww {
                    rep.fail(format!("trial {t}: {u} dominates {w} but welfare {wu} < {ww}"));
                }
                if ww.is_positive() {
                    rep.observe_ratio(wu / ww);
                }
            }
        }
    });
    Ok(report)
}

/// `core(⌊v⌋)` belongs to the enumerated vector set, for random `v` plus the
/// uniform vector and `(1, 0, ..., 0)`.
pub fn range_membership_audit(
    trials: usize,
    params: &MechanismParams,
    seed: u64,
) -> Result<PropertyReport> {
    let n = params.n();
    let members: HashSet<MultiplierVector> = enumerate_core_vectors(params)?.into_iter().collect();
    let mut corner = vec![Rational::zero(); n];
    corner[0] = Rational::one();
    let fixed = [
        MultiplierVector::uniform(n)?,
        MultiplierVector::new(corner)?,
    ];
    let audit = |v: &MultiplierVector, label: &str, rep: &mut PropertyReport| {
        let target = floor_of(v, params).and_then(|fl| core_of(&fl, params));
        match target {
            Ok(c) if members.contains(&c) => {}
            Ok(c) => rep.fail(format!("{label}: core of floor {c} of {v} not enumerated")),
            Err(e) => rep.fail(format!("{label}: {e}")),
        }
    };
    let mut report = run_trials(&format!("range-membership n={n}"), trials, seed, |t, rng, rep| {
        let v = random_multiplier_vector(n, rng);
        audit(&v, &format!("trial {t}"), rep);
    });
    for v in &fixed {
        report.trials += 1;
        audit(v, "fixed", &mut report);
    }
    Ok(report)
}

/// A public valuation together with a raw bid profile.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AuctionInstance {
    pub id: usize,
    pub valuation: Valuation,
    pub bids: Vec<Rational>,
}

/// Random coverage instances with `n` in `min_n..=max_n`, `m` in
/// `1..=max_m`, up to 8 viewers and bids `k/12`, `k` in `1..=36`.
pub fn random_corpus(
    count: usize,
    min_n: usize,
    max_n: usize,
    max_m: usize,
    seed: u64,
) -> Vec<AuctionInstance> {
    (0..count)
        .map(|id| {
            let mut rng = trial_rng(seed, id);
            let n = rng.gen_range(min_n..=max_n);
            let m = rng.gen_range(1..=max_m);
            let viewers = rng.gen_range(1..=8);
            let f = random_coverage(m, viewers, &mut rng).expect("positive sizes");
            let bids = (0..n)
                .map(|_| rational::ratio(rng.gen_range(1..=36), 12))
                .collect();
            AuctionInstance {
                id,
                valuation: Valuation::Coverage(f),
                bids,
            }
        })
        .collect()
}

/// Which approximation guarantee to hold a mechanism to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WelfareBound {
    /// `3α/(4ab)` for the vector-fitting range.
    VectorFitting,
    /// `α/ln n` for the prefix-vector range (n >= 2).
    SimpleLn,
    /// `α/H_n`, the harmonic-number form of the prefix-vector bound.
    SimpleHarmonic,
}

/// Certified rational enclosure `lo <= ln n <= hi`.
pub fn ln_enclosure(n: usize) -> (Rational, Rational) {
    let x = (n as f64).ln();
    let slack = 1e-12 * x.max(1.0);
    let lo = Rational::from_float(x - slack).expect("finite");
    let hi = Rational::from_float(x + slack).expect("finite");
    (lo, hi)
}

pub fn harmonic(n: usize) -> Rational {
    (1..=n as i64).map(|j| rational::ratio(1, j)).sum()
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RatioRow {
    pub instance_id: usize,
    pub n: usize,
    pub ratio: Rational,
}

/// Results of [`check_mechanism_bounds`].
#[derive(Debug, Clone)]
pub struct BoundsEvaluation {
    /// Welfare / OPT against the chosen bound.
    pub bound: PropertyReport,
    /// Payments >= 0, truthful utilities >= 0, single-agent payment = 0.
    pub vcg: PropertyReport,
    pub ratios: Vec<RatioRow>,
}

/// Mechanism welfare against the brute-force optimum, with the exact
/// solver as the black box (`α = 1`).
pub fn check_mechanism_bounds(
    instances: &[AuctionInstance],
    a: &Rational,
    b: &Rational,
    mode: Mode,
    bound: WelfareBound,
) -> Result<BoundsEvaluation> {
    let label = match bound {
        WelfareBound::VectorFitting => "welfare >= 3/(4ab) OPT",
        WelfareBound::SimpleLn => "welfare >= OPT/ln n",
        WelfareBound::SimpleHarmonic => "welfare >= OPT/H_n",
    };
    let solver = ExactSolver::default();
    let rows: Vec<Result<(PropertyReport, PropertyReport, Option<RatioRow>)>> = instances
        .par_iter()
        .map(|inst| {
            let n = inst.bids.len();
            let f = &inst.valuation;
            let params = MechanismParams::new(a.clone(), b.clone(), n)?;
            let range = build_range_for_mode(f, &params, &solver, mode)?;
            let out = run_on_range(&range, &inst.bids)?;
            let opt_alloc = exact_solver(f, &inst.bids)?.assignment;
            let opt = welfare(f, &inst.bids, &opt_alloc)?;

            let mut rep = PropertyReport::new(label);
            rep.trials = 1;
            let mut vcg = PropertyReport::new("vcg sanity");
            vcg.trials = 1;
            let tag = format!("instance {} (n={n}, m={})", inst.id, f.num_items());

            let mut row = None;
            if opt.is_positive() {
                let ratio = &out.welfare / &opt;
                rep.observe_ratio(ratio.clone());
                row = Some(RatioRow {
                    instance_id: inst.id,
                    n,
                    ratio: ratio.clone(),
                });
                let ok = match bound {
                    WelfareBound::VectorFitting => {
                        ratio * rational::int(4) * a * b >= rational::int(3)
                    }
                    WelfareBound::SimpleLn if n < 2 => true,
                    WelfareBound::SimpleLn => {
                        let (lo, hi) = ln_enclosure(n);
                        if &ratio * &hi < Rational::one() {
                            false
                        } else if &ratio * &lo >= Rational::one() {
                            true
                        } else {
                            rep.fail(format!("{tag}: ratio {ratio} too close to 1/ln n to certify"));
                            true
                        }
                    }
                    WelfareBound::SimpleHarmonic => ratio * harmonic(n) >= Rational::one(),
                };
                if !ok {
                    rep.fail(format!(
                        "{tag}: welfare {} / OPT {opt} below bound",
                        out.welfare
                    ));
                }
            } else if out.welfare < opt {
                rep.fail(format!("{tag}: welfare {} below OPT {opt}", out.welfare));
            }

            check_vcg_outcome(&out, &inst.bids, &tag, &mut vcg);
            Ok((rep, vcg, row))
        })
        .collect();

    let mut eval = BoundsEvaluation {
        bound: PropertyReport::new(format!("{label} ({mode})")),
        vcg: PropertyReport::new(format!("vcg sanity ({mode})")),
        ratios: Vec::new(),
    };
    for r in rows {
        let (rep, vcg, row) = r?;
        eval.bound.absorb(rep);
        eval.vcg.absorb(vcg);
        eval.ratios.extend(row);
    }
    Ok(eval)
}

fn check_vcg_outcome(
    out: &crate::mechanism::Outcome,
    bids: &[Rational],
    tag: &str,
    rep: &mut PropertyReport,
) {
    for (i, p) in out.payments.iter().enumerate() {
        if p.is_negative() {
            rep.fail(format!("{tag}: agent {i} pays {p}"));
        }
        let u = out.utility(i, &bids[i]);
        if u.is_negative() {
            rep.fail(format!("{tag}: agent {i} has truthful utility {u}"));
        }
    }
    if bids.len() == 1 && !out.payments[0].is_zero() {
        rep.fail(format!("{tag}: single agent pays {}", out.payments[0]));
    }
}

/// `k/16 · v` for `k = 0..=32` (or `k/16` when `v = 0`); contains `v`.
pub fn bid_grid(true_value: &Rational) -> Vec<Rational> {
    let unit = if true_value.is_zero() {
        Rational::one()
    } else {
        true_value.clone()
    };
    (0..=32).map(|k| &unit * rational::ratio(k, 16)).collect()
}

/// Indices `k` where `values[k] > values[k+1]` although bids increase.
pub fn monotonicity_violations(points: &[(Rational, Rational)]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..points.len()).collect();
    order.sort_by(|&x, &y| points[x].0.cmp(&points[y].0));
    order
        .windows(2)
        .filter(|w| points[w[0]].0 < points[w[1]].0 && points[w[0]].1 > points[w[1]].1)
        .map(|w| w[0])
        .collect()
}

/// Grid sweep over unilateral deviations on a fixed range: no deviation
/// beats the true bid, and each agent's `f(T_i)` is non-decreasing in its
/// own bid.
pub fn check_truthfulness(
    range: &Range,
    true_bids: &[Rational],
    label: &str,
) -> Result<PropertyReport> {
    let mut rep = PropertyReport::new(format!("truthfulness {label}"));
    let truthful = run_on_range(range, true_bids)?;
    for (i, v) in true_bids.iter().enumerate() {
        let honest = truthful.utility(i, v);
        let mut points = Vec::new();
        for dev in bid_grid(v) {
            let mut bids = true_bids.to_vec();
            bids[i] = dev.clone();
            let out = run_on_range(range, &bids)?;
            rep.trials += 1;
            let u = out.utility(i, v);
            if u > honest {
                rep.fail(format!(
                    "{label}: agent {i} (true {v}) gains by bidding {dev}: {u} > {honest}"
                ));
            }
            points.push((dev, out.values[i].clone()));
        }
        for k in monotonicity_violations(&points) {
            rep.fail(format!(
                "{label}: agent {i} allocation value drops after bid {}",
                points[k].0
            ));
        }
    }
    Ok(rep)
}

/// Builds the range for `mode` and runs [`check_truthfulness`].
pub fn check_instance_truthfulness(
    inst: &AuctionInstance,
    params: &MechanismParams,
    solver: &dyn WelfareSolver,
    mode: Mode,
) -> Result<PropertyReport> {
    let range = build_range_for_mode(&inst.valuation, params, solver, mode)?;
    check_truthfulness(
        &range,
        &inst.bids,
        &format!("instance {} {mode}/{}", inst.id, solver.id()),
    )
}

/// Allocation values of agent 1 under the greedy rule on the
/// three-slot instance, at bids `(1, 11/10)` and `(1, 9/10)`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GreedyWitness {
    pub value_at_high_bid: Rational,
    pub value_at_low_bid: Rational,
    /// Monotonicity violations found on agent 1's bid grid.
    pub violations: Vec<String>,
    /// Passes iff the witness is reproduced: values 6 and 10 and at least
    /// one violation flagged.
    pub report: PropertyReport,
}

/// Uses the greedy solver directly as the allocation rule and sweeps agent
/// 1's bid over the grid plus the two witness bids.
pub fn greedy_counterexample() -> Result<GreedyWitness> {
    let f = three_slot_example();
    let value_for = |bid: Rational| -> Result<Rational> {
        let res = GreedySolver.solve(&f, &[Rational::one(), bid])?;
        f.value(res.assignment.part(1))
    };
    let high = value_for(rational::ratio(11, 10))?;
    let low = value_for(rational::ratio(9, 10))?;
    let mut rep = PropertyReport::new("greedy counterexample (allocation monotonicity fails)");
    let mut points = Vec::new();
    let mut bids = bid_grid(&Rational::one());
    bids.extend([rational::ratio(9, 10), rational::ratio(11, 10)]);
    bids.sort();
    for bid in bids {
        rep.trials += 1;
        points.push((bid.clone(), value_for(bid)?));
    }
    let violations: Vec<String> = monotonicity_violations(&points)
        .into_iter()
        .map(|k| {
            format!(
                "agent 1 value drops from {} at bid {} to {} at bid {}",
                rational::format(&points[k].1),
                rational::format(&points[k].0),
                rational::format(&points[k + 1].1),
                rational::format(&points[k + 1].0)
            )
        })
        .collect();
    if high != rational::int(6) || low != rational::int(10) {
        rep.fail(format!(
            "expected values 10 at bid 9/10 and 6 at bid 11/10, got {} and {}",
            rational::format(&low),
            rational::format(&high)
        ));
    }
    if violations.is_empty() {
        rep.fail("no monotonicity violation flagged");
    }
    Ok(GreedyWitness {
        value_at_high_bid: high,
        value_at_low_bid: low,
        violations,
        report: rep,
    })
}

/// `1 + Σ_{j=2..n} v_j (r_j - j v_j) / (r_j r_{j-1})` for
/// `v_j = (√j - √(j-1))/√n`.
///
/// Uses `√j - √(j-1) = 1/(√j + √(j-1))` and the telescoped prefix sums
/// `r_j = √(j/n)` to avoid cancellation, with compensated summation.
pub fn tight_bound_sum(n: usize) -> Result<f64> {
    if n == 0 {
        return Err(Error::InvalidInput("n must be positive".into()));
    }
    let sqrt_n = (n as f64).sqrt();
    let mut sum = 1.0f64;
    let mut carry = 0.0f64;
    for j in 2..=n {
        let (sj, sj1) = ((j as f64).sqrt(), ((j - 1) as f64).sqrt());
        let v = 1.0 / ((sj + sj1) * sqrt_n);
        let r = sj / sqrt_n;
        let r_prev = sj1 / sqrt_n;
        let term = v * (r - j as f64 * v) / (r * r_prev);
        // Neumaier summation
        let t = sum + term;
        if sum.abs() >= term.abs() {
            carry += (sum - t) + term;
        } else {
            carry += (term - t) + sum;
        }
        sum = t;
    }
    Ok(sum + carry)
}

pub fn warmup_tight_series(n_values: &[usize]) -> Result<Vec<(usize, f64)>> {
    n_values
        .iter()
        .map(|&n| {
            if n > 1_000_000 {
                return Err(Error::ResourceLimit(format!("n = {n} exceeds 10^6")));
            }
            Ok((n, tight_bound_sum(n)?))
        })
        .collect()
}

/// Least-squares line `y = slope·x + intercept`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinearFit {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
}

pub fn fit_line(points: &[(f64, f64)]) -> LinearFit {
    let k = points.len() as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / k;
    let my = points.iter().map(|p| p.1).sum::<f64>() / k;
    let sxx: f64 = points.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let syy: f64 = points.iter().map(|p| (p.1 - my).powi(2)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ss_res: f64 = points
        .iter()
        .map(|p| (p.1 - slope * p.0 - intercept).powi(2))
        .sum();
    let r_squared = if syy > 0.0 { 1.0 - ss_res / syy } else { 1.0 };
    LinearFit {
        slope,
        intercept,
        r_squared,
    }
}

/// Minimum slope of the bound sum against `ln n`.
pub const TIGHT_SERIES_MIN_SLOPE: f64 = 0.3;
/// Minimum coefficient of determination of that fit.
pub const TIGHT_SERIES_MIN_R2: f64 = 0.99;

/// Fits the tight-instance series against `ln n` and checks it is
/// non-decreasing with slope above [`TIGHT_SERIES_MIN_SLOPE`] and
/// `R² >= TIGHT_SERIES_MIN_R2`.
pub fn check_tight_series(series: &[(usize, f64)]) -> (PropertyReport, LinearFit) {
    let mut rep = PropertyReport::new("tight-instance bound sum grows like ln n");
    rep.trials = series.len();
    for w in series.windows(2) {
        if w[1].0 > w[0].0 && w[1].1 < w[0].1 {
            rep.fail(format!("sum decreases from n={} to n={}", w[0].0, w[1].0));
        }
    }
    let pts: Vec<(f64, f64)> = series.iter().map(|&(n, s)| ((n as f64).ln(), s)).collect();
    let fit = fit_line(&pts);
    if fit.slope.is_nan() || fit.slope <= TIGHT_SERIES_MIN_SLOPE {
        rep.fail(format!(
            "slope {:.6} against ln n is not above {TIGHT_SERIES_MIN_SLOPE}",
            fit.slope
        ));
    }
    if fit.r_squared.is_nan() || fit.r_squared < TIGHT_SERIES_MIN_R2 {
        rep.fail(format!("fit R² {:.6} below {TIGHT_SERIES_MIN_R2}", fit.r_squared));
    }
    (rep, fit)
}

/// `(n, |U|, distinct allocations, bound)` for the vector-fitting range.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RangeSizeRow {
    pub n: usize,
    pub vectors: usize,
    pub bound: u128,
}

pub fn range_size_series(a: &Rational, b: &Rational, n_values: &[usize]) -> Result<Vec<RangeSizeRow>> {
    n_values
        .iter()
        .map(|&n| {
            let p = MechanismParams::new(a.clone(), b.clone(), n)?;
            Ok(RangeSizeRow {
                n,
                vectors: enumerate_core_vectors(&p)?.len(),
                bound: crate::mechanism::enumeration_bound(&p),
            })
        })
        .collect()
}

pub fn tight_series_csv(series: &[(usize, f64)]) -> String {
    let mut out = String::from("n,bound_sum\n");
    for (n, s) in series {
        writeln!(out, "{n},{s:.12}").expect("write to string");
    }
    out
}

pub fn range_size_csv(rows: &[RangeSizeRow]) -> String {
    let mut out = String::from("n,range_size\n");
    for r in rows {
        writeln!(out, "{},{}", r.n, r.vectors).expect("write to string");
    }
    out
}

pub fn ratio_csv(rows: &[RatioRow]) -> String {
    let mut out = String::from("instance_id,ratio\n");
    for r in rows {
        writeln!(out, "{},{}", r.instance_id, rational::format(&r.ratio)).expect("write to string");
    }
    out
}

/// Shuffled copy of `bids` together with the permutation applied.
pub fn shuffled<R: Rng + ?Sized>(bids: &[Rational], rng: &mut R) -> (Vec<Rational>, Vec<usize>) {
    let mut perm: Vec<usize> = (0..bids.len()).collect();
    perm.shuffle(rng);
    (perm.iter().map(|&k| bids[k].clone()).collect(), perm)
}
