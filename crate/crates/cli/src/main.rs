//! `threshold-lab`: enumerate, simulate and verify fixed-energy sandpiles.
//!
//! Exit status is 0 on success, 1 on invalid input and 2 when a
//! verification or tolerance check fails.

mod commands;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

#[derive(Parser)]
#[command(name = "threshold-lab", version, about = "Threshold states of the fixed-energy sandpile")]
struct Cli {
    /// Worker threads for replica runs (default: available parallelism).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write a generated graph as an edge list.
    Gen(GenArgs),
    /// Enumerate recurrent states and generator tables for one sink.
    Enumerate(EnumerateArgs),
    /// Print the recurrent decomposition of a sandpile as JSON.
    Decompose(DecomposeArgs),
    /// Sample threshold states and compare them with the limit laws.
    Simulate(SimulateArgs),
    /// Emit the exact limit-law tables.
    Laws(LawsArgs),
    /// Wave counts against forest counts, and threshold-wave statistics.
    Waves(WavesArgs),
    /// Limit law and crossing simulation for a chain with edge lengths.
    Renewal(RenewalArgs),
    /// Run named invariant suites.
    Verify(VerifyArgs),
}

#[derive(Args, Clone, Serialize)]
pub struct GraphArgs {
    /// Edge-list file, or `gen:SPEC` for a generated graph.
    #[arg(long, conflicts_with = "gen")]
    pub graph: Option<String>,
    /// Generated graph: complete:N, cycle:N or torus:NX,NY.
    #[arg(long)]
    pub gen: Option<String>,
    /// Sink vertex (default: the last vertex).
    #[arg(long)]
    pub sink: Option<usize>,
}

#[derive(Args, Clone, Serialize)]
pub struct DriveArgs {
    /// `uniform` or an alpha file.
    #[arg(long, default_value = "uniform")]
    pub alpha: String,
    /// Constant initial condition s0 ≡ H.
    #[arg(long, allow_negative_numbers = true, conflicts_with = "s0")]
    pub h: Option<i64>,
    /// Initial sandpile file.
    #[arg(long)]
    pub s0: Option<PathBuf>,
}

#[derive(Args, Clone, Serialize)]
pub struct RunArgs {
    #[arg(long, default_value_t = 10_000)]
    pub replicas: u64,
    /// Master seed (falls back to THRESHOLD_LAB_SEED, then 0).
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output directory for CSV tables, summary.json and manifest.json.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Also write gnuplot-ready `.dat` files.
    #[arg(long)]
    pub plot: bool,
}

#[derive(Args, Serialize)]
pub struct GenArgs {
    /// complete:N, cycle:N or torus:NX,NY.
    #[arg(long)]
    pub gen: String,
    /// Output file (default: stdout).
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Serialize)]
pub struct EnumerateArgs {
    #[command(flatten)]
    pub graph: GraphArgs,
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Refuse tables with more states than this.
    #[arg(long, default_value_t = threshold_lab::recurrent::DEFAULT_ENUMERATION_CAP)]
    pub cap: usize,
}

#[derive(Args, Serialize)]
pub struct DecomposeArgs {
    #[command(flatten)]
    pub graph: GraphArgs,
    #[arg(long, allow_negative_numbers = true, conflicts_with = "s0")]
    pub h: Option<i64>,
    #[arg(long)]
    pub s0: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum, Serialize, PartialEq, Eq)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    /// Open chain plus burst bookkeeping (fast).
    Reduced,
    /// Sinkless stabilization at every step (small graphs only).
    Direct,
    /// One wave per step.
    Refined,
}

#[derive(Args, Serialize)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub graph: GraphArgs,
    #[command(flatten)]
    pub drive: DriveArgs,
    #[command(flatten)]
    pub run: RunArgs,
    #[arg(long, value_enum, default_value_t = Mode::Reduced)]
    pub mode: Mode,
    /// Exit with status 2 if the joint-law TV distance exceeds this.
    #[arg(long)]
    pub max_tv: Option<f64>,
    /// Skip enumeration and only estimate the threshold density.
    #[arg(long)]
    pub no_table: bool,
}

#[derive(Args, Serialize)]
pub struct LawsArgs {
    #[command(flatten)]
    pub graph: GraphArgs,
    #[arg(long, default_value = "uniform")]
    pub alpha: String,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub plot: bool,
}

#[derive(Args, Serialize)]
pub struct WavesArgs {
    #[command(flatten)]
    pub graph: GraphArgs,
    #[command(flatten)]
    pub drive: DriveArgs,
    #[command(flatten)]
    pub run: RunArgs,
    /// Exit with status 2 if the toppling-set TV distance exceeds this.
    #[arg(long)]
    pub max_tv: Option<f64>,
}

#[derive(Args, Serialize)]
pub struct RenewalArgs {
    /// Chain file.
    #[arg(long)]
    pub chain: PathBuf,
    /// Crossing level.
    #[arg(long, default_value_t = 10_000)]
    pub n: u64,
    /// Starting state.
    #[arg(long, default_value_t = 0)]
    pub x0: usize,
    #[command(flatten)]
    pub run: RunArgs,
    #[arg(long)]
    pub max_tv: Option<f64>,
}

#[derive(Args, Serialize)]
pub struct VerifyArgs {
    #[command(flatten)]
    pub graph: GraphArgs,
    /// core, decompose, chains, waves, renewal or all.
    #[arg(long, default_value = "all")]
    pub suite: String,
    #[arg(long)]
    pub seed: Option<u64>,
}

/// A check that ran to completion and failed.
#[derive(Debug)]
pub struct VerificationFailed(pub String);

impl std::fmt::Display for VerificationFailed {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "verification failed: {}", self.0)
    }
}

impl std::error::Error for VerificationFailed {}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    if let Some(t) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(t).build_global() {
            eprintln!("error: {e}");
            return ExitCode::from(1);
        }
    }
    let result = match &cli.command {
        Command::Gen(a) => commands::gen(a),
        Command::Enumerate(a) => commands::enumerate(a),
        Command::Decompose(a) => commands::decompose(a),
        Command::Simulate(a) => commands::simulate(a),
        Command::Laws(a) => commands::laws(a),
        Command::Waves(a) => commands::waves(a),
        Command::Renewal(a) => commands::renewal(a),
        Command::Verify(a) => commands::verify(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        // Downstream closed stdout (e.g. `| head`).
        Err(e) if e.downcast_ref::<std::io::Error>().is_some_and(|io| io.kind() == std::io::ErrorKind::BrokenPipe) => {
            ExitCode::SUCCESS
        }
        Err(e) if e.is::<VerificationFailed>() => {
            eprintln!("{e}");
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
