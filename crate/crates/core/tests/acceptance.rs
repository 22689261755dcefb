//! Acceptance criteria. Each test prints a single `PASS`/`FAIL` line to
//! stderr (bypassing output capture) and then asserts.

use std::io::Write;
use std::time::{Duration, Instant};

use num_traits::{Signed, Zero};
use vecfit_core::mechanism::{build_range_for_mode, ceil_log, enumerate_core_vectors, run_on_range, Mode};
use vecfit_core::rational::{format, int};
use vecfit_core::solver::{ExactSolver, GreedySolver, WelfareSolver};
use vecfit_core::verify::{
    check_dominance_lemma, check_floor_core_lemmas, check_instance_truthfulness,
    check_mechanism_bounds, check_tight_series, greedy_counterexample, random_corpus,
    range_membership_audit, warmup_tight_series, AuctionInstance, PropertyReport, WelfareBound,
};
use vecfit_core::vector::MechanismParams;

const SEED: u64 = 0x5EED_2024;

const BOUND_CORPUS: usize = 240;
const TRUTH_CORPUS: usize = 60;
const LEMMA_TRIALS: usize = 10_000;
const MEMBERSHIP_TRIALS: usize = 1_000;
const LEMMA_SIZES: [usize; 3] = [4, 8, 16];
const SIZE_CHECK: [usize; 5] = [2, 4, 8, 16, 32];
const TIGHT_SIZES: [usize; 4] = [100, 1_000, 10_000, 100_000];

const LIMIT_1: Duration = Duration::from_secs(1);
const LIMIT_2: Duration = Duration::from_secs(120);
const LIMIT_3: Duration = Duration::from_secs(60);
const LIMIT_4: Duration = Duration::from_secs(300);
const LIMIT_5: Duration = Duration::from_secs(120);
const LIMIT_6: Duration = Duration::from_secs(120);
const LIMIT_7: Duration = Duration::from_secs(30);

/// n <= 4, m <= 5, bids k/12.
fn bound_corpus() -> Vec<AuctionInstance> {
    random_corpus(BOUND_CORPUS, 1, 4, 5, SEED)
}

fn truth_corpus() -> Vec<AuctionInstance> {
    random_corpus(TRUTH_CORPUS, 1, 4, 4, SEED ^ 4)
}

fn line(id: &str, title: &str, pass: bool, detail: &str) {
    let verdict = if pass { "PASS" } else { "FAIL" };
    let mut err = std::io::stderr().lock();
    let _ = writeln!(err, "\n{verdict} [{id}] {title}: {detail}");
}

fn first_failures(reports: &[PropertyReport]) -> String {
    reports
        .iter()
        .flat_map(|r| r.failures.iter().take(3))
        .take(5)
        .cloned()
        .collect::<Vec<_>>()
        .join("; ")
}

fn timed(limit: Duration, start: Instant) -> PropertyReport {
    let elapsed = start.elapsed();
    let mut rep = PropertyReport::new("runtime");
    rep.trials = 1;
    if elapsed >= limit {
        rep.fail(format!("took {elapsed:?}, limit {limit:?}"));
    }
    rep
}

fn conclude(id: &str, title: &str, reports: &[PropertyReport], start: Instant, extra: &str) {
    let pass = reports.iter().all(PropertyReport::passed);
    let checks: usize = reports.iter().map(|r| r.trials).sum();
    let mut detail = format!("{checks} checks{extra}, {:.2?}", start.elapsed());
    if !pass {
        detail.push_str(&format!("; {}", first_failures(reports)));
    }
    line(id, title, pass, &detail);
    assert!(pass, "criterion {id} failed: {}", first_failures(reports));
}

fn min_ratio(r: &PropertyReport) -> String {
    r.min_ratio.as_ref().map(format).unwrap_or_else(|| "-".into())
}

#[test]
fn c1_greedy_is_not_monotone() {
    let start = Instant::now();
    let w = greedy_counterexample().unwrap();
    let reports = [w.report.clone(), timed(LIMIT_1, start)];
    conclude(
        "1",
        "greedy rule as allocation is non-monotone",
        &reports,
        start,
        &format!(
            ", f(T_2) = {} at bid 11/10 and {} at bid 9/10, {} violation(s) flagged",
            format(&w.value_at_high_bid),
            format(&w.value_at_low_bid),
            w.violations.len()
        ),
    );
}

#[test]
fn c2_vector_fitting_welfare_bound() {
    let start = Instant::now();
    let corpus = bound_corpus();
    let eval = check_mechanism_bounds(&corpus, &int(2), &int(2), Mode::VectorFitting, WelfareBound::VectorFitting)
        .unwrap();
    let extra = format!(", {} instances, min ratio {}", corpus.len(), min_ratio(&eval.bound));
    conclude(
        "2",
        "vector-fitting welfare >= 3/16 OPT (a=b=2, exact solver)",
        &[eval.bound, timed(LIMIT_2, start)],
        start,
        &extra,
    );
}

#[test]
fn c3_simple_mechanism_ln_bound() {
    let start = Instant::now();
    let corpus: Vec<_> = bound_corpus().into_iter().filter(|i| i.bids.len() >= 2).collect();
    let ln = check_mechanism_bounds(&corpus, &int(2), &int(2), Mode::Simple, WelfareBound::SimpleLn).unwrap();
    let hn = check_mechanism_bounds(&corpus, &int(2), &int(2), Mode::Simple, WelfareBound::SimpleHarmonic).unwrap();
    // Supplementary: the harmonic form of the same bound.
    line(
        "3/H_n",
        "simple welfare >= OPT/H_n (supplementary)",
        hn.bound.passed(),
        &format!("{} instances, min ratio {}", corpus.len(), min_ratio(&hn.bound)),
    );
    let by_n: Vec<String> = (2..=4)
        .map(|n| {
            let total = ln.ratios.iter().filter(|r| r.n == n).count();
            let tag = format!("(n={n},");
            let bad = ln.bound.failures.iter().filter(|f| f.contains(&tag)).count();
            format!("n={n}: {bad}/{total} below")
        })
        .collect();
    let extra = format!(", {}", by_n.join(", "));
    conclude(
        "3",
        "simple welfare >= OPT/ln n (n >= 2, exact solver)",
        &[ln.bound, timed(LIMIT_3, start)],
        start,
        &extra,
    );
}

#[test]
fn c4_truthfulness_grid() {
    let start = Instant::now();
    let corpus = truth_corpus();
    let solvers: [&dyn WelfareSolver; 2] = [&ExactSolver::default(), &GreedySolver];
    let mut reports = Vec::new();
    for inst in &corpus {
        let p = MechanismParams::binary(inst.bids.len()).unwrap();
        for mode in [Mode::Simple, Mode::VectorFitting] {
            for s in solvers {
                reports.push(check_instance_truthfulness(inst, &p, s, mode).unwrap());
            }
        }
    }
    reports.push(timed(LIMIT_4, start));
    conclude(
        "4",
        "no profitable deviation on the 33-point grid, monotone allocation value",
        &reports,
        start,
        &format!(", {} instances x 2 modes x 2 solvers", corpus.len()),
    );
}

#[test]
fn c5_structural_lemmas() {
    let start = Instant::now();
    let mut reports = Vec::new();
    let mut mins = Vec::new();
    for (k, &n) in LEMMA_SIZES.iter().enumerate() {
        let p = MechanismParams::binary(n).unwrap();
        let seed = SEED.wrapping_add(k as u64);
        let [floor, core] = check_floor_core_lemmas(LEMMA_TRIALS, &p, seed).unwrap();
        let dom = check_dominance_lemma(LEMMA_TRIALS, &p, seed).unwrap();
        mins.push(format!("n={n} floor {} core {}", min_ratio(&floor), min_ratio(&core)));
        reports.extend([floor, core, dom]);
    }
    reports.push(timed(LIMIT_5, start));
    conclude(
        "5",
        "floor (>= 3/8), core (>= 1/2) and dominance lemmas, a=b=2",
        &reports,
        start,
        &format!(", min ratios {}", mins.join(", ")),
    );
}

#[test]
fn c6_range_membership_and_size() {
    let start = Instant::now();
    let mut reports = Vec::new();
    for (k, &n) in LEMMA_SIZES.iter().enumerate() {
        let p = MechanismParams::binary(n).unwrap();
        reports.push(range_membership_audit(MEMBERSHIP_TRIALS, &p, SEED ^ (k as u64 + 60)).unwrap());
    }
    let mut size = PropertyReport::new("range size");
    let mut rows = Vec::new();
    for n in SIZE_CHECK {
        size.trials += 1;
        let p = MechanismParams::binary(n).unwrap();
        let k = ceil_log(&int(2), n);
        let bound = u128::from(k + 2).pow(k);
        // |R| counts distinct allocations, so |U| bounds it from above.
        let vectors = enumerate_core_vectors(&p).unwrap().len();
        if vectors as u128 > bound {
            size.fail(format!("n={n}: |U| = {vectors} > {bound}"));
        }
        rows.push(format!("n={n}: {vectors}<={bound}"));
    }
    reports.push(size);
    reports.push(timed(LIMIT_6, start));
    conclude(
        "6",
        "core of floor lies in U; |R| <= (ceil(log2 n)+2)^ceil(log2 n)",
        &reports,
        start,
        &format!(", {}", rows.join(" ")),
    );
}

#[test]
fn c7_tight_series_growth() {
    let start = Instant::now();
    let series = warmup_tight_series(&TIGHT_SIZES).unwrap();
    let (rep, fit) = check_tight_series(&series);
    let sums: Vec<String> = series.iter().map(|(n, s)| format!("{n}:{s:.4}")).collect();
    conclude(
        "7",
        "tight-instance bound sum is monotone with slope > 0.3 against ln n",
        &[rep, timed(LIMIT_7, start)],
        start,
        &format!(
            ", slope {:.6}, intercept {:.4}, R² {:.6}, sums {}",
            fit.slope,
            fit.intercept,
            fit.r_squared,
            sums.join(" ")
        ),
    );
}

#[test]
fn c8_vcg_sanity() {
    let start = Instant::now();
    let mut reports = Vec::new();
    let corpora = [bound_corpus(), truth_corpus()];
    for corpus in &corpora {
        for mode in [Mode::Simple, Mode::VectorFitting] {
            let eval = check_mechanism_bounds(corpus, &int(2), &int(2), mode, WelfareBound::SimpleHarmonic).unwrap();
            reports.push(eval.vcg);
        }
    }
    // Ranges built with greedy, as in the truthfulness grid.
    let mut greedy = PropertyReport::new("vcg sanity (greedy ranges)");
    for inst in corpora.iter().flatten() {
        let p = MechanismParams::binary(inst.bids.len()).unwrap();
        for mode in [Mode::Simple, Mode::VectorFitting] {
            greedy.trials += 1;
            let range = build_range_for_mode(&inst.valuation, &p, &GreedySolver, mode).unwrap();
            let out = run_on_range(&range, &inst.bids).unwrap();
            for (i, pay) in out.payments.iter().enumerate() {
                if pay.is_negative() || out.utility(i, &inst.bids[i]).is_negative() {
                    greedy.fail(format!("instance {} {mode}: agent {i}", inst.id));
                }
            }
            if inst.bids.len() == 1 && !out.payments[0].is_zero() {
                greedy.fail(format!("instance {} {mode}: single agent pays", inst.id));
            }
        }
    }
    reports.push(greedy);
    let singles = corpora.iter().flatten().filter(|i| i.bids.len() == 1).count();
    let mut present = PropertyReport::new("single agents present");
    present.trials = 1;
    if singles == 0 {
        present.fail("no single-agent instances");
    }
    reports.push(present);
    conclude(
        "8",
        "VCG payments >= 0, truthful utility >= 0, single-agent payment 0",
        &reports,
        start,
        &format!(", corpora of criteria 2-4, {singles} single-agent instances"),
    );
}
