//! `qtask`: GHZ wire-cutting experiments, QIR runs and manifest replay over
//! the task-graph runtime.
//!
//! Exit codes: 0 success, 1 execution error, 2 usage or validation error.

mod commands;
pub mod manifest;
pub mod report;

use std::ffi::OsString;
use std::io::Write;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use qtask_core::cutting::CutPlan;

pub use commands::{execute, Execution};
pub use manifest::{Experiment, Format, PolicyName, RunManifest, TransportName};
pub use report::{parse_report, CutCircuits, ReportRow};

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Exec(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Exec(_) => 1,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Usage(m) => write!(f, "usage error: {m}"),
            CliError::Exec(m) => write!(f, "error: {m}"),
        }
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "qtask",
    version,
    about = "Run GHZ wire-cutting and QIR experiments on a task-graph runtime"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Cut an n-qubit GHZ circuit, run every fragment variant and reconstruct <Z...Z>.
    GhzCut(GhzCutArgs),
    /// Run the uncut GHZ circuit as a single task.
    GhzNocut(GhzNocutArgs),
    /// Run a QIR .ll file and print its histogram.
    QirRun(QirRunArgs),
    /// Repeat a run from its manifest.
    Replay(ReplayArgs),
    /// Run a task graph described by a JSON manifest and print the result dump.
    Graph(GraphArgs),
    #[command(hide = true)]
    Worker {
        #[arg(long)]
        backend: String,
    },
}

#[derive(Debug, Args)]
pub struct ExecArgs {
    #[arg(long, env = qtask_runtime::WORKERS_ENV)]
    pub workers: Option<usize>,
    #[arg(long, value_enum, default_value_t = PolicyName::RoundRobin)]
    pub policy: PolicyName,
    /// Backend selector, e.g. `sv`, `sv:mode=trajectory`, `mock(sv):delay=0.5`.
    #[arg(long, default_value = "sv")]
    pub backend: String,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Round-robin placement granularity.
    #[arg(long, default_value_t = 1)]
    pub batch: usize,
    #[arg(long, value_enum, default_value_t = TransportName::Memory)]
    pub transport: TransportName,
}

#[derive(Debug, Args)]
pub struct OutputArgs {
    #[arg(long, value_enum, default_value_t = Format::Json)]
    pub format: Format,
    /// Write the report here instead of stdout, plus `<stem>.manifest.json`
    /// beside it.
    #[arg(long)]
    pub output: Option<PathBuf>,
    /// Write every memory object and the timing report as JSON.
    #[arg(long)]
    pub dump: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct GhzCutArgs {
    #[arg(long)]
    pub qubits: usize,
    /// Cut positions, e.g. `1,2`.
    #[arg(long)]
    pub cuts: CutPlan,
    #[arg(long, default_value_t = 1000)]
    pub shots: u64,
    /// Run structurally identical variants once.
    #[arg(long)]
    pub dedup: bool,
    #[command(flatten)]
    pub exec: ExecArgs,
    #[command(flatten)]
    pub out: OutputArgs,
}

#[derive(Debug, Args)]
pub struct GhzNocutArgs {
    #[arg(long)]
    pub qubits: usize,
    #[arg(long, default_value_t = 1000)]
    pub shots: u64,
    /// Report the exact statevector expectation instead of the parity mean.
    #[arg(long)]
    pub exact: bool,
    #[command(flatten)]
    pub exec: ExecArgs,
    #[command(flatten)]
    pub out: OutputArgs,
}

#[derive(Debug, Args)]
pub struct QirRunArgs {
    #[arg(long)]
    pub file: PathBuf,
    #[arg(long, default_value_t = 1000)]
    pub shots: u64,
    #[command(flatten)]
    pub exec: ExecArgs,
    #[arg(long)]
    pub output: Option<PathBuf>,
    #[arg(long)]
    pub dump: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ReplayArgs {
    #[arg(long)]
    pub manifest: PathBuf,
    #[arg(long, env = qtask_runtime::WORKERS_ENV)]
    pub workers: Option<usize>,
    #[arg(long, value_enum)]
    pub format: Option<Format>,
    #[arg(long)]
    pub output: Option<PathBuf>,
    #[arg(long)]
    pub dump: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct GraphArgs {
    #[arg(long)]
    pub manifest: PathBuf,
    /// Resize the worker list, cycling through its backends.
    #[arg(long, env = qtask_runtime::WORKERS_ENV)]
    pub workers: Option<usize>,
    #[arg(long, value_enum, default_value_t = TransportName::Memory)]
    pub transport: TransportName,
    #[arg(long)]
    pub output: Option<PathBuf>,
}

/// Parses `args` (program name first), runs the command and returns the
/// process exit code.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = e.exit_code();
            let text = e.render().to_string();
            if code == 0 {
                let _ = out.write_all(text.as_bytes());
            } else {
                let _ = err.write_all(text.as_bytes());
            }
            return code;
        }
    };
    match commands::dispatch(cli.command, out, err) {
        Ok(()) => 0,
        Err(e) => {
            let _ = writeln!(err, "{e}");
            e.exit_code()
        }
    }
}
