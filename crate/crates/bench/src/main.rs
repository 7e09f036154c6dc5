//! `autosage` benchmark harness.
//!
//! Exit codes: 0 ok, 1 usage or invalid input, 2 I/O or corrupt cache,
//! 3 strict-replay miss.

mod commands;
mod report;

use std::path::PathBuf;
use std::process::ExitCode;

use autosage::cache::CacheError;
use autosage::csr::CsrIoError;
use autosage::env::EnvError;
use autosage::scheduler::ScheduleError;
use autosage::Op;
use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Parser, Debug)]
#[command(
    name = "autosage",
    version,
    about = "Input-aware SpMM/SDDMM scheduling harness"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Write a seeded synthetic graph in the binary CSR format.
    Gen {
        #[command(subcommand)]
        kind: GenKind,
    },
    /// Baseline vs scheduled kernel on the full graph, per feature width.
    Bench(BenchArgs),
    /// Baseline, row-parallel and hub-split timings across split thresholds.
    SweepSplit(SweepArgs),
    /// Chosen variant with 4-wide lanes forced off and on.
    AblateVec(AblateArgs),
    /// CSR attention pipeline, cold, warm and replayed.
    Attention(AttentionArgs),
    /// Replay a cached decision and re-time it.
    Replay(ReplayArgs),
}

#[derive(Subcommand, Debug)]
enum GenKind {
    /// Erdos-Renyi G(n, p) without self-loops.
    Er {
        #[arg(long)]
        n: usize,
        #[arg(long)]
        p: f64,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Base degree k with a fraction h of rows scaled by the hub factor.
    Hubskew {
        #[arg(long)]
        n: usize,
        #[arg(long)]
        k: usize,
        #[arg(long)]
        h: f64,
        #[arg(long, default_value_t = autosage::csr::DEFAULT_HUB_FACTOR)]
        hub_factor: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// A fixed number of hub rows of one degree, every other row of another.
    Hubfixed {
        #[arg(long)]
        n: usize,
        #[arg(long, default_value_t = 1)]
        hubs: usize,
        #[arg(long)]
        hub_deg: usize,
        #[arg(long)]
        other_deg: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
enum OpArg {
    Spmm,
    Sddmm,
    Both,
}

impl OpArg {
    fn ops(self) -> Vec<Op> {
        match self {
            OpArg::Spmm => vec![Op::SpMM],
            OpArg::Sddmm => vec![Op::SDDMM],
            OpArg::Both => vec![Op::SpMM, Op::SDDMM],
        }
    }
}

/// Scheduler settings. Each flag wins over its `AUTOSAGE_*` variable.
#[derive(Args, Debug, Clone, Default)]
struct SchedArgs {
    /// Probe sample fraction [AUTOSAGE_PROBE_FRAC].
    #[arg(long)]
    frac: Option<f64>,
    /// Minimum probe sample rows [AUTOSAGE_PROBE_MIN_ROWS].
    #[arg(long)]
    min_rows: Option<usize>,
    /// Timed probe iterations [AUTOSAGE_PROBE_ITERS].
    #[arg(long)]
    probe_iters: Option<usize>,
    /// Per-target probe cap in ms [AUTOSAGE_PROBE_CAP_MS].
    #[arg(long)]
    cap_ms: Option<f64>,
    /// Candidates probed [AUTOSAGE_PROBE_TOPK].
    #[arg(long)]
    top_k: Option<usize>,
    /// Guardrail factor [AUTOSAGE_GUARDRAIL].
    #[arg(long)]
    alpha: Option<f64>,
    /// Persistent cache file [AUTOSAGE_CACHE].
    #[arg(long)]
    cache: Option<PathBuf>,
    /// Never probe; use cached decisions only [AUTOSAGE_REPLAY_ONLY].
    #[arg(long)]
    replay_only: bool,
    /// Treat replay misses as errors [AUTOSAGE_REPLAY_STRICT].
    #[arg(long)]
    strict: bool,
    /// Force a choice string, bypassing probes [AUTOSAGE_FORCE].
    #[arg(long)]
    force: Option<String>,
}

#[derive(Args, Debug, Clone)]
struct TimingArgs {
    /// Timed iterations per measurement.
    #[arg(long, default_value_t = 12)]
    iters: usize,
    /// Untimed warm-up iterations.
    #[arg(long, default_value_t = 2)]
    warmup: usize,
    /// Seed of the dense operands.
    #[arg(long, default_value_t = 7)]
    seed: u64,
}

#[derive(Args, Debug)]
struct BenchArgs {
    #[arg(long)]
    graph: PathBuf,
    #[arg(long, value_enum, default_value_t = OpArg::Spmm)]
    op: OpArg,
    /// Comma-separated feature widths.
    #[arg(long, value_delimiter = ',', default_value = "32,64,128")]
    f: Vec<usize>,
    /// CSV output; the sidecar goes next to it.
    #[arg(long)]
    out: PathBuf,
    #[command(flatten)]
    timing: TimingArgs,
    #[command(flatten)]
    sched: SchedArgs,
}

#[derive(Args, Debug)]
struct SweepArgs {
    #[arg(long)]
    graph: PathBuf,
    #[arg(long, value_enum, default_value_t = OpArg::Spmm)]
    op: OpArg,
    #[arg(long, default_value_t = 128)]
    f: usize,
    /// Comma-separated hub thresholds.
    #[arg(long, value_delimiter = ',', default_value = "64,256,1024,4096")]
    thresholds: Vec<usize>,
    #[arg(long, default_value_t = 64)]
    f_tile: usize,
    #[arg(long, default_value_t = 4)]
    rows_per_chunk: usize,
    #[arg(long)]
    out: PathBuf,
    #[command(flatten)]
    timing: TimingArgs,
}

#[derive(Args, Debug)]
struct AblateArgs {
    #[arg(long)]
    graph: PathBuf,
    #[arg(long, value_enum, default_value_t = OpArg::Spmm)]
    op: OpArg,
    #[arg(long, value_delimiter = ',', default_value = "32,63,64,128")]
    f: Vec<usize>,
    #[arg(long)]
    out: PathBuf,
    #[command(flatten)]
    timing: TimingArgs,
    #[command(flatten)]
    sched: SchedArgs,
}

#[derive(Args, Debug)]
struct AttentionArgs {
    #[arg(long)]
    graph: PathBuf,
    /// Query/key width.
    #[arg(long, default_value_t = 64)]
    f: usize,
    /// Value width.
    #[arg(long, default_value_t = 64)]
    f_out: usize,
    #[arg(long)]
    out: PathBuf,
    #[command(flatten)]
    timing: TimingArgs,
    #[command(flatten)]
    sched: SchedArgs,
}

#[derive(Args, Debug)]
struct ReplayArgs {
    #[arg(long)]
    cache: PathBuf,
    #[arg(long)]
    graph: PathBuf,
    #[arg(long, value_enum, default_value_t = OpArg::Spmm)]
    op: OpArg,
    #[arg(long)]
    f: usize,
    /// Fail on a miss instead of falling back to the baseline.
    #[arg(long)]
    strict: bool,
    #[command(flatten)]
    timing: TimingArgs,
}

#[derive(Debug, thiserror::Error)]
enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Io(String),
    #[error("{0}")]
    ReplayMiss(String),
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Io(_) => 2,
            CliError::ReplayMiss(_) => 3,
        }
    }
}

impl From<ScheduleError> for CliError {
    fn from(e: ScheduleError) -> Self {
        match e {
            ScheduleError::ReplayMiss(_) => CliError::ReplayMiss(e.to_string()),
            ScheduleError::Cache(_) => CliError::Io(e.to_string()),
            _ => CliError::Usage(e.to_string()),
        }
    }
}

impl From<CacheError> for CliError {
    fn from(e: CacheError) -> Self {
        CliError::Io(e.to_string())
    }
}

impl From<CsrIoError> for CliError {
    fn from(e: CsrIoError) -> Self {
        CliError::Io(e.to_string())
    }
}

impl From<EnvError> for CliError {
    fn from(e: EnvError) -> Self {
        CliError::Usage(e.to_string())
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e.to_string())
    }
}

impl From<autosage::kernels::KernelError> for CliError {
    fn from(e: autosage::kernels::KernelError) -> Self {
        CliError::Usage(e.to_string())
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    let result = match cli.command {
        Command::Gen { kind } => commands::gen(kind),
        Command::Bench(a) => commands::bench(a),
        Command::SweepSplit(a) => commands::sweep_split(a),
        Command::AblateVec(a) => commands::ablate_vec(a),
        Command::Attention(a) => commands::attention(a),
        Command::Replay(a) => commands::replay(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.code())
        }
    }
}
