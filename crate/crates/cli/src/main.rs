//! `cyclic-shift`: cyclic shift testing from the command line.
//!
//! Exit codes: 0 success, 1 failure writing outputs, 2 input or usage error,
//! 3 null model violates the ergodicity or transition conditions,
//! 4 exact enumeration over budget.

mod commands;
mod manifest;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use cyclic_shift::io::NaPolicy;
use cyclic_shift::{Direction, Error, LocalStatistic, MethodChoice, DEFAULT_ENUMERATION_BUDGET};
use serde::Serialize;

#[derive(Parser, Debug)]
#[command(name = "cyclic-shift", version, about = "Cyclic shift testing for recurrent genomic aberrations")]
struct Cli {
    /// Worker threads. Results do not depend on this.
    #[arg(long, global = true, env = "CYCLIC_SHIFT_THREADS")]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Test a marker table for a recurrent gain or loss.
    Test(TestArgs),
    /// Test, flatten the peak, and repeat while significant.
    Peel(PeelArgs),
    /// Simulate a marker table from a null model.
    Simulate(SimulateArgs),
    /// Compare the exact and cyclic null distributions on simulated data.
    Validate(ValidateArgs),
    /// Preprocess a table: p-values to z-scores, or tumor minus normal.
    Transform(TransformArgs),
}

#[derive(ValueEnum, Clone, Copy, Debug, Serialize)]
#[serde(rename_all = "kebab-case")]
enum DirectionArg {
    Gain,
    Loss,
}

impl From<DirectionArg> for Direction {
    fn from(d: DirectionArg) -> Self {
        match d {
            DirectionArg::Gain => Direction::Gain,
            DirectionArg::Loss => Direction::Loss,
        }
    }
}

#[derive(ValueEnum, Clone, Copy, Debug, Serialize)]
#[serde(rename_all = "kebab-case")]
enum StatArg {
    Sum,
    Mean,
}

impl From<StatArg> for LocalStatistic {
    fn from(s: StatArg) -> Self {
        match s {
            StatArg::Sum => LocalStatistic::Sum,
            StatArg::Mean => LocalStatistic::Mean,
        }
    }
}

#[derive(ValueEnum, Clone, Copy, Debug, Serialize)]
#[serde(rename_all = "kebab-case")]
enum NaPolicyArg {
    Reject,
    ImputeRowMedian,
}

impl From<NaPolicyArg> for NaPolicy {
    fn from(p: NaPolicyArg) -> Self {
        match p {
            NaPolicyArg::Reject => NaPolicy::Reject,
            NaPolicyArg::ImputeRowMedian => NaPolicy::ImputeRowMedian,
        }
    }
}

#[derive(Args, Debug, Serialize)]
struct InputArgs {
    /// Marker table (TSV, optionally gzipped).
    #[arg(long)]
    input: PathBuf,
    #[arg(long, value_enum, default_value = "reject")]
    na_policy: NaPolicyArg,
    /// Restrict the analysis to one chromosome.
    #[arg(long)]
    chrom: Option<String>,
}

#[derive(Args, Debug, Serialize)]
struct TestFlags {
    #[command(flatten)]
    #[serde(flatten)]
    input: InputArgs,
    #[arg(long, value_enum, default_value = "gain")]
    direction: DirectionArg,
    #[arg(long, value_enum, default_value = "sum")]
    stat: StatArg,
    /// Number of random shift vectors N.
    #[arg(long, default_value_t = cyclic_shift::DEFAULT_NUM_SHIFTS)]
    n_shifts: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output directory for report.json, column_stats.csv and manifest.json.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug, Serialize)]
struct TestArgs {
    #[command(flatten)]
    #[serde(flatten)]
    flags: TestFlags,
    /// Enumerate all m^n shift vectors instead of sampling.
    #[arg(long)]
    exhaustive: bool,
    /// Largest number of shift vectors to enumerate.
    #[arg(long, env = "CYCLIC_SHIFT_BUDGET", default_value_t = DEFAULT_ENUMERATION_BUDGET)]
    budget: u64,
}

#[derive(Args, Debug, Serialize)]
struct PeelArgs {
    #[command(flatten)]
    #[serde(flatten)]
    flags: TestFlags,
    #[arg(long, default_value_t = 0.05)]
    alpha: f64,
    #[arg(long, default_value_t = 5)]
    max_iter: usize,
    /// Quantile of the column sums that peaks are flattened to.
    #[arg(long, default_value_t = 0.5)]
    baseline_quantile: f64,
}

#[derive(ValueEnum, Clone, Copy, Debug, Serialize, PartialEq)]
#[serde(rename_all = "kebab-case")]
enum ModelArg {
    Markov,
    Ar1,
}

#[derive(Args, Debug, Serialize)]
struct SimulateArgs {
    /// Null model spec file.
    #[arg(long)]
    spec: PathBuf,
    /// Expected model kind; checked against the spec file.
    #[arg(long, value_enum)]
    model: Option<ModelArg>,
    #[arg(long)]
    n: usize,
    #[arg(long)]
    m: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output marker table. A manifest is written next to it.
    #[arg(long)]
    out: PathBuf,
}

#[derive(ValueEnum, Clone, Copy, Debug, Serialize)]
#[serde(rename_all = "kebab-case")]
enum MethodArg {
    Auto,
    Exact,
    MonteCarlo,
}

impl From<MethodArg> for MethodChoice {
    fn from(m: MethodArg) -> Self {
        match m {
            MethodArg::Auto => MethodChoice::Auto,
            MethodArg::Exact => MethodChoice::Exact,
            MethodArg::MonteCarlo => MethodChoice::MonteCarlo,
        }
    }
}

#[derive(Args, Debug, Serialize)]
struct ValidateArgs {
    #[arg(long)]
    spec: PathBuf,
    #[arg(long)]
    n: usize,
    /// Comma-separated row lengths.
    #[arg(long, value_delimiter = ',', required = true)]
    m_list: Vec<usize>,
    #[arg(long, default_value_t = 20)]
    replicates: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, value_enum, default_value = "auto")]
    method: MethodArg,
    /// Shift vectors sampled per replicate when not enumerating.
    #[arg(long, default_value_t = 10_000)]
    samples: usize,
    #[arg(long, env = "CYCLIC_SHIFT_BUDGET", default_value_t = DEFAULT_ENUMERATION_BUDGET)]
    budget: u64,
    #[arg(long)]
    out_dir: PathBuf,
}

#[derive(ValueEnum, Clone, Copy, Debug, Serialize)]
#[serde(rename_all = "kebab-case")]
enum TransformMode {
    Zscore,
    PairedDiff,
}

#[derive(Args, Debug, Serialize)]
struct TransformArgs {
    #[arg(long, value_enum)]
    mode: TransformMode,
    /// p-value table (zscore) or tumor table (paired-diff).
    #[arg(long)]
    input: PathBuf,
    /// Matched normal table for paired-diff.
    #[arg(long, required_if_eq("mode", "paired-diff"))]
    normal: Option<PathBuf>,
    /// Scores below this are raised to it.
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    floor: f64,
    #[arg(long, value_enum, default_value = "reject")]
    na_policy: NaPolicyArg,
    #[arg(long)]
    out: PathBuf,
}

/// A failure with the exit code it maps to.
#[derive(Debug)]
pub struct Failure {
    pub code: u8,
    pub message: String,
}

impl Failure {
    pub fn output(err: impl std::fmt::Display) -> Self {
        Self {
            code: 1,
            message: format!("writing output: {err}"),
        }
    }

    pub fn usage(message: impl Into<String>) -> Self {
        Self {
            code: 2,
            message: message.into(),
        }
    }
}

impl From<Error> for Failure {
    fn from(err: Error) -> Self {
        let code = match err {
            Error::Conditions(_) | Error::NotErgodic(_) => 3,
            Error::BudgetExceeded { .. } => 4,
            _ => 2,
        };
        Self {
            code,
            message: err.to_string(),
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let argv: Vec<String> = std::env::args().skip(1).collect();
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(t) = cli.threads {
        if t == 0 {
            eprintln!("error: --threads must be at least 1");
            return ExitCode::from(2);
        }
        builder = builder.num_threads(t);
    }
    let pool = match builder.build() {
        Ok(pool) => pool,
        Err(e) => {
            eprintln!("error: cannot start worker pool: {e}");
            return ExitCode::from(1);
        }
    };
    let ctx = commands::Context {
        argv,
        threads: pool.current_num_threads(),
    };
    let outcome = pool.install(|| match &cli.command {
        Command::Test(a) => commands::test(&ctx, a),
        Command::Peel(a) => commands::peel(&ctx, a),
        Command::Simulate(a) => commands::simulate(&ctx, a),
        Command::Validate(a) => commands::validate(&ctx, a),
        Command::Transform(a) => commands::transform(&ctx, a),
    });
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
