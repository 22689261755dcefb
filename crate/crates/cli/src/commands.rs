use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde_json::json;

use vecfit_core::instance::{three_slot_instance, random_additive, random_coverage, Instance, Valuation};
use vecfit_core::mechanism::{
    build_range_for_mode, enumerate_core_vectors, enumeration_bound, run_mechanism, Mode,
};
use vecfit_core::rational::{self, Rational};
use vecfit_core::solver::{SolverKind, WelfareSolver};
use vecfit_core::vector::MechanismParams;
use vecfit_core::verify::{self, AuctionInstance, PropertyReport, WelfareBound};
use vecfit_core::Error;

use crate::{GenArgs, Kind, MechArgs, Preset, RangeArgs, RunArgs, Series, Source, Suite, SweepArgs, VerifyArgs};

/// 2 for invalid input (including unreadable files), 3 for resource limits.
pub fn exit_code(err: &anyhow::Error) -> u8 {
    match err.downcast_ref::<Error>() {
        Some(Error::ResourceLimit(_)) => 3,
        _ => 2,
    }
}

fn emit(text: &str, out: Option<&Path>) -> Result<()> {
    match out {
        Some(path) => fs::write(path, text).with_context(|| format!("writing {}", path.display())),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn with_newline(mut s: String) -> String {
    s.push('\n');
    s
}

fn load_instance(path: Option<&PathBuf>, preset: Option<Preset>) -> Result<Instance> {
    match (path, preset) {
        (_, Some(Preset::ThreeSlot)) => Ok(three_slot_instance()),
        (Some(p), None) => {
            let text = fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
            Ok(Instance::from_json(&text)?)
        }
        (None, None) => bail!(Error::InvalidInput("pass --instance or --preset".into())),
    }
}

fn parse_bids(spec: &str) -> Result<Vec<Rational>> {
    let text = match spec.strip_prefix('@') {
        Some(path) => fs::read_to_string(path).with_context(|| format!("reading bids from {path}"))?,
        None => spec.to_string(),
    };
    let bids = text
        .split(|c: char| c == ',' || c.is_whitespace())
        .filter(|t| !t.is_empty())
        .map(rational::parse)
        .collect::<vecfit_core::Result<Vec<_>>>()?;
    Ok(bids)
}

struct Mech {
    mode: Mode,
    a: Rational,
    b: Rational,
    solver: Box<dyn WelfareSolver>,
}

impl Mech {
    fn parse(args: &MechArgs) -> Result<Self> {
        let a = rational::parse(&args.a)?;
        let b = rational::parse(&args.b)?;
        let one = rational::one();
        if a <= one || b <= one {
            bail!(Error::InvalidInput(format!("a and b must exceed 1, got a = {} and b = {}", args.a, args.b)));
        }
        Ok(Self {
            mode: args.mode.parse()?,
            a,
            b,
            solver: args.solver.parse::<SolverKind>()?.build(),
        })
    }

    fn params(&self, n: usize) -> Result<MechanismParams> {
        Ok(MechanismParams::new(self.a.clone(), self.b.clone(), n)?)
    }
}

pub fn gen(args: GenArgs) -> Result<ExitCode> {
    let inst = match args.preset {
        Some(Preset::ThreeSlot) => three_slot_instance(),
        None => {
            let m = args.m.unwrap_or(0);
            if m == 0 {
                bail!(Error::InvalidInput("m must be at least 1".into()));
            }
            if args.n == Some(0) {
                bail!(Error::InvalidInput("n must be at least 1".into()));
            }
            let mut rng = ChaCha8Rng::seed_from_u64(args.seed);
            let valuation = match args.kind {
                Kind::Coverage => Valuation::Coverage(random_coverage(m, args.viewers, &mut rng)?),
                Kind::Additive => Valuation::Additive(random_additive(m, &mut rng)?),
            };
            Instance::new(valuation, args.n)
        }
    };
    emit(&with_newline(inst.to_json()), args.out.as_deref())?;
    Ok(ExitCode::SUCCESS)
}

fn source_instance(src: &Source) -> Result<Instance> {
    load_instance(src.instance.as_ref(), src.preset)
}

pub fn run(args: RunArgs) -> Result<ExitCode> {
    let inst = source_instance(&args.source)?;
    let bids = parse_bids(&args.bids)?;
    if bids.is_empty() {
        bail!(Error::InvalidInput("no bids given".into()));
    }
    if let Some(n) = inst.n {
        if n != bids.len() {
            bail!(Error::InvalidInput(format!("instance is for {n} agents but {} bids given", bids.len())));
        }
    }
    let mech = Mech::parse(&args.mech)?;
    let params = mech.params(bids.len())?;
    let out = run_mechanism(&inst.valuation, &params, mech.solver.as_ref(), mech.mode, &bids)?;
    emit(&with_newline(out.to_json()), args.out.as_deref())?;
    Ok(ExitCode::SUCCESS)
}

pub fn range(args: RangeArgs) -> Result<ExitCode> {
    let inst = source_instance(&args.source)?;
    let n = match args.n.or(inst.n) {
        Some(n) => n,
        None => bail!(Error::InvalidInput("pass --n (the instance has no agent count)".into())),
    };
    let mech = Mech::parse(&args.mech)?;
    let params = mech.params(n)?;
    let range = build_range_for_mode(&inst.valuation, &params, mech.solver.as_ref(), mech.mode)?;
    let text = if args.stats {
        let vectors = match mech.mode {
            Mode::VectorFitting => enumerate_core_vectors(&params)?.len(),
            Mode::Simple => n,
        };
        let stats = json!({
            "n": n,
            "a": rational::format(params.a()),
            "b": rational::format(params.b()),
            "mode": mech.mode.as_str(),
            "solver": mech.solver.id(),
            "vectors": vectors,
            "range_size": range.distinct_allocations(),
            "bound": enumeration_bound(&params).to_string(),
        });
        serde_json::to_string_pretty(&stats)?
    } else {
        range.to_json()
    };
    emit(&with_newline(text), args.out.as_deref())?;
    Ok(ExitCode::SUCCESS)
}

fn reports_json(reports: &[PropertyReport]) -> Result<String> {
    Ok(serde_json::to_string_pretty(reports)?)
}

fn status(reports: &[PropertyReport]) -> ExitCode {
    if reports.iter().all(PropertyReport::passed) {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(1)
    }
}

fn parse_sizes(text: &str) -> Result<Vec<usize>> {
    text.split(',')
        .map(|s| {
            s.trim()
                .parse::<usize>()
                .map_err(|_| anyhow::Error::new(Error::InvalidInput(format!("bad size {s:?}"))))
        })
        .collect()
}

fn mode_bound(mode: Mode, ln: bool) -> WelfareBound {
    match (mode, ln) {
        (Mode::VectorFitting, _) => WelfareBound::VectorFitting,
        (Mode::Simple, true) => WelfareBound::SimpleLn,
        (Mode::Simple, false) => WelfareBound::SimpleHarmonic,
    }
}

pub fn verify(args: VerifyArgs) -> Result<ExitCode> {
    let mech = Mech::parse(&args.mech)?;
    let out = args.out.as_deref();
    let mut csv = None;
    let reports = match args.suite {
        Suite::FloorCoreLemmas => verify::check_floor_core_lemmas(args.trials, &mech.params(args.n)?, args.seed)?.to_vec(),
        Suite::DominanceLemma => vec![verify::check_dominance_lemma(args.trials, &mech.params(args.n)?, args.seed)?],
        Suite::RangeMembership => vec![verify::range_membership_audit(args.trials, &mech.params(args.n)?, args.seed)?],
        Suite::MechanismBounds => {
            if args.n_max == 0 || args.m_max == 0 {
                bail!(Error::InvalidInput("--n-max and --m-max must be positive".into()));
            }
            let corpus = verify::random_corpus(args.count, 1, args.n_max, args.m_max, args.seed);
            let eval = verify::check_mechanism_bounds(&corpus, &mech.a, &mech.b, mech.mode, mode_bound(mech.mode, args.ln_bound))?;
            csv = Some(verify::ratio_csv(&eval.ratios));
            vec![eval.bound, eval.vcg]
        }
        Suite::Truthfulness => {
            let corpus = if args.instance.is_some() || args.preset.is_some() {
                let inst = load_instance(args.instance.as_ref(), args.preset)?;
                let Some(bids) = args.bids.as_deref() else {
                    bail!(Error::InvalidInput("--bids is required with an instance".into()));
                };
                vec![AuctionInstance {
                    id: 0,
                    valuation: inst.valuation,
                    bids: parse_bids(bids)?,
                }]
            } else {
                verify::random_corpus(args.count, 1, args.n_max.max(1), args.m_max.max(1), args.seed)
            };
            corpus
                .iter()
                .map(|inst| {
                    let p = mech.params(inst.bids.len())?;
                    Ok(verify::check_instance_truthfulness(inst, &p, mech.solver.as_ref(), mech.mode)?)
                })
                .collect::<Result<Vec<_>>>()?
        }
        Suite::TightSeries => {
            let series = verify::warmup_tight_series(&parse_sizes(&args.sizes)?)?;
            let (rep, fit) = verify::check_tight_series(&series);
            csv = Some(verify::tight_series_csv(&series));
            let doc = json!({
                "report": rep,
                "slope": fit.slope,
                "intercept": fit.intercept,
                "r_squared": fit.r_squared,
            });
            emit(&with_newline(serde_json::to_string_pretty(&doc)?), out)?;
            write_csv(args.csv.as_deref(), csv)?;
            return Ok(status(&[rep]));
        }
        Suite::GreedyCounterexample => {
            let w = verify::greedy_counterexample()?;
            let doc = json!({
                "report": w.report,
                "value_at_high_bid": rational::format(&w.value_at_high_bid),
                "value_at_low_bid": rational::format(&w.value_at_low_bid),
                "violations": w.violations,
            });
            emit(&with_newline(serde_json::to_string_pretty(&doc)?), out)?;
            return Ok(status(&[w.report]));
        }
    };
    emit(&with_newline(reports_json(&reports)?), out)?;
    write_csv(args.csv.as_deref(), csv)?;
    Ok(status(&reports))
}

fn write_csv(path: Option<&Path>, csv: Option<String>) -> Result<()> {
    match (path, csv) {
        (Some(p), Some(text)) => fs::write(p, text).with_context(|| format!("writing {}", p.display())),
        (Some(_), None) => bail!(Error::InvalidInput("this suite produces no CSV".into())),
        _ => Ok(()),
    }
}

pub fn sweep(args: SweepArgs) -> Result<ExitCode> {
    let mech = Mech::parse(&args.mech)?;
    let n_max = args.n_max.unwrap_or(match args.series {
        Series::Ratio => 4,
        Series::RangeSize => 32,
    });
    if n_max == 0 {
        bail!(Error::InvalidInput("--n-max must be positive".into()));
    }
    let text = match args.series {
        Series::RangeSize => {
            let ns: Vec<usize> = (1..=n_max).collect();
            verify::range_size_csv(&verify::range_size_series(&mech.a, &mech.b, &ns)?)
        }
        Series::Ratio => {
            if args.m_max == 0 {
                bail!(Error::InvalidInput("--m-max must be positive".into()));
            }
            let mut corpus = Vec::new();
            for n in 1..=n_max {
                for mut inst in verify::random_corpus(args.count, n, n, args.m_max, args.seed ^ n as u64) {
                    inst.id = corpus.len();
                    corpus.push(inst);
                }
            }
            let eval = verify::check_mechanism_bounds(&corpus, &mech.a, &mech.b, mech.mode, mode_bound(mech.mode, false))?;
            verify::ratio_csv(&eval.ratios)
        }
    };
    emit(&text, args.out.as_deref())?;
    Ok(ExitCode::SUCCESS)
}
