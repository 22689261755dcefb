use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

mod commands;

/// Truthful maximal-in-range auctions over a public set function.
#[derive(Parser, Debug)]
#[command(name = "vecfit", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate an instance file.
    Gen(GenArgs),
    /// Run a mechanism on a bid profile and print the outcome.
    Run(RunArgs),
    /// Dump the range of a mechanism, or its size with --stats.
    Range(RangeArgs),
    /// Run a verification suite and print its report.
    Verify(VerifyArgs),
    /// Emit a CSV series over n.
    Sweep(SweepArgs),
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
enum Preset {
    #[value(name = "appendix-a")]
    ThreeSlot,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
enum Kind {
    Coverage,
    Additive,
}

#[derive(Args, Debug)]
struct GenArgs {
    #[arg(long, value_enum, default_value = "coverage")]
    kind: Kind,
    /// Number of items (slots).
    #[arg(long, required_unless_present = "preset")]
    m: Option<usize>,
    /// Agent count recorded as a hint in the file.
    #[arg(long)]
    n: Option<usize>,
    /// Number of viewers for coverage instances.
    #[arg(long, default_value_t = 10)]
    viewers: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, value_enum, conflicts_with_all = ["m", "kind"])]
    preset: Option<Preset>,
    #[arg(long)]
    out: Option<PathBuf>,
}

/// Where the public function comes from.
#[derive(Args, Debug, Clone)]
struct Source {
    /// Instance JSON written by `gen`.
    #[arg(long, required_unless_present = "preset", conflicts_with = "preset")]
    instance: Option<PathBuf>,
    #[arg(long, value_enum)]
    preset: Option<Preset>,
}

/// Mechanism configuration shared by `run`, `range` and some suites.
#[derive(Args, Debug, Clone)]
struct MechArgs {
    /// simple | vector_fitting
    #[arg(long, default_value = "vector_fitting")]
    mode: String,
    #[arg(long, default_value = "2")]
    a: String,
    #[arg(long, default_value = "2")]
    b: String,
    /// exact | greedy
    #[arg(long, default_value = "exact")]
    solver: String,
}

#[derive(Args, Debug)]
struct RunArgs {
    #[command(flatten)]
    source: Source,
    /// Comma-separated rationals, or @path to a file holding them.
    #[arg(long)]
    bids: String,
    #[command(flatten)]
    mech: MechArgs,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct RangeArgs {
    #[command(flatten)]
    source: Source,
    /// Number of agents; defaults to the instance hint.
    #[arg(long)]
    n: Option<usize>,
    #[command(flatten)]
    mech: MechArgs,
    /// Print |U|, |R| and the size bound instead of the entries.
    #[arg(long)]
    stats: bool,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
enum Suite {
    FloorCoreLemmas,
    DominanceLemma,
    MechanismBounds,
    Truthfulness,
    TightSeries,
    RangeMembership,
    GreedyCounterexample,
}

#[derive(Args, Debug)]
struct VerifyArgs {
    #[arg(value_enum)]
    suite: Suite,
    #[arg(long, default_value_t = 1000)]
    trials: usize,
    /// Vector length for the lemma suites.
    #[arg(long, default_value_t = 8)]
    n: usize,
    /// Largest agent count in random corpora.
    #[arg(long, default_value_t = 4)]
    n_max: usize,
    /// Largest item count in random corpora.
    #[arg(long, default_value_t = 5)]
    m_max: usize,
    /// Number of random instances.
    #[arg(long, default_value_t = 200)]
    count: usize,
    /// Comma-separated n values for tight-series.
    #[arg(long, default_value = "100,1000,10000,100000")]
    sizes: String,
    /// Use `ln n` (otherwise `H_n`) as the simple-mechanism bound.
    #[arg(long)]
    ln_bound: bool,
    #[arg(long)]
    instance: Option<PathBuf>,
    #[arg(long, value_enum)]
    preset: Option<Preset>,
    #[arg(long)]
    bids: Option<String>,
    #[command(flatten)]
    mech: MechArgs,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Report JSON destination (stdout if absent).
    #[arg(long)]
    out: Option<PathBuf>,
    /// CSV destination for suites that produce a series.
    #[arg(long)]
    csv: Option<PathBuf>,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
enum Series {
    Ratio,
    RangeSize,
}

#[derive(Args, Debug)]
struct SweepArgs {
    #[arg(value_enum)]
    series: Series,
    /// Largest n in the series [default: 4 for ratio, 32 for range-size].
    #[arg(long)]
    n_max: Option<usize>,
    /// Random instances per n for the ratio series.
    #[arg(long, default_value_t = 20)]
    count: usize,
    #[arg(long, default_value_t = 5)]
    m_max: usize,
    #[command(flatten)]
    mech: MechArgs,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Gen(a) => commands::gen(a),
        Command::Run(a) => commands::run(a),
        Command::Range(a) => commands::range(a),
        Command::Verify(a) => commands::verify(a),
        Command::Sweep(a) => commands::sweep(a),
    };
    match result {
        Ok(code) => code,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(commands::exit_code(&err))
        }
    }
}
