//! `bwshare`: exact solvers, reference-table reproduction and learning runs for the
//! static/mobile bandwidth-sharing model.

mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use bwshare_core::Error;

#[derive(Parser, Debug)]
#[command(
    name = "bwshare",
    version,
    about = "Opportunistic bandwidth sharing between static and mobile users"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Equal-share vs optimal sharing for the six reference (alpha, theta, xi) rows.
    Table1(Common),
    /// Exact evaluation of one stationary policy.
    Eval(EvalArgs),
    /// Optimal policy under a static-throughput constraint R0.
    SolveConstrained(SolveArgs),
    /// Single-timescale learner at a fixed multiplier.
    Learn1(LearnArgs),
    /// Two-timescale constrained learner.
    Learn2(LearnArgs),
    /// Alpha-fair learner at a fixed multiplier.
    Learn3(LearnArgs),
    /// Alpha-fair constrained learner.
    Learn4(LearnArgs),
    /// Write the bundled reference scenario as JSON.
    ExportScenario(Common),
}

#[derive(Args, Debug, Clone)]
struct Common {
    /// Scenario JSON file [default: bundled reference scenario].
    #[arg(long)]
    scenario: Option<PathBuf>,
    /// Output directory.
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Override the arrival probability of every road.
    #[arg(long)]
    theta: Option<f64>,
    /// Fading model: keep the scenario's, or replace it.
    #[arg(long, value_enum, default_value_t = FadingChoice::Scenario)]
    fading: FadingChoice,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
enum FadingChoice {
    /// Whatever the scenario file specifies.
    Scenario,
    /// No fading.
    None,
    /// Two-state chain, gains {0.5, 1.5}, switch probability 0.1.
    TwoState,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
enum PolicyKind {
    Threshold,
    Fair,
    EqualShare,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
enum Tie {
    Static,
    Mobile,
}

#[derive(Args, Debug)]
struct EvalArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long, value_enum, default_value_t = PolicyKind::Threshold)]
    policy: PolicyKind,
    /// Lagrange multiplier on the static class.
    #[arg(long, default_value_t = 1.0)]
    xi: f64,
    /// Fairness exponent in (0, 1) for fair and equal-share policies.
    #[arg(long, default_value_t = 0.5)]
    alpha: f64,
    /// Class served when R_mobile = xi * R_static exactly.
    #[arg(long, value_enum, default_value_t = Tie::Static)]
    tie: Tie,
}

#[derive(Args, Debug)]
struct SolveArgs {
    #[command(flatten)]
    common: Common,
    /// Minimum static class throughput.
    #[arg(long)]
    r0: f64,
    /// Solve the alpha-fair problem instead (alpha in (0, 1)).
    #[arg(long)]
    alpha: Option<f64>,
}

#[derive(Args, Debug)]
struct LearnArgs {
    #[command(flatten)]
    common: Common,
    /// Multiplier (learn1, learn3).
    #[arg(long)]
    xi: Option<f64>,
    /// Fairness exponent (learn3, learn4).
    #[arg(long)]
    alpha: Option<f64>,
    /// Static throughput target (learn2, learn4).
    #[arg(long)]
    r0: Option<f64>,
    /// Exploration probability (learn1, learn2).
    #[arg(long, default_value_t = 0.05)]
    epsilon: f64,
    /// Perturbation width for learn2 [default: from the exact breakpoints].
    #[arg(long)]
    delta: Option<f64>,
    /// Fast step exponent, in (1/2, 1].
    #[arg(long, default_value_t = 0.6)]
    n1: f64,
    /// Slow step exponent, in (n1, 1].
    #[arg(long, default_value_t = 0.9)]
    n2: f64,
    /// Lower multiplier bound B (learn4).
    #[arg(long, default_value_t = 1e-3)]
    lower: f64,
    /// Upper multiplier bound A [default: 2 * max R_mobile / R_static].
    #[arg(long)]
    upper: Option<f64>,
    /// Use the unweighted static sample in the learn4 multiplier update.
    #[arg(long)]
    literal_drift: bool,
    /// Number of slots.
    #[arg(long, default_value_t = 200_000)]
    slots: u64,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Independent replications, run in parallel.
    #[arg(long, default_value_t = 1)]
    reps: usize,
    /// Slots between metric snapshots.
    #[arg(long, default_value_t = 1000)]
    snapshot_stride: u64,
    /// Fraction of the horizon used for trailing averages.
    #[arg(long, default_value_t = 0.2)]
    window: f64,
}

fn exit_code(err: &Error) -> u8 {
    match err {
        Error::Validation { .. }
        | Error::DegenerateLayout { .. }
        | Error::StateSpaceTooLarge { .. }
        | Error::UnknownController(_)
        | Error::Json(_) => 2,
        Error::Infeasible { .. } => 3,
        Error::NonConvergence { .. } => 4,
        Error::Io(_) => 1,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match commands::run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(exit_code(&err))
        }
    }
}
