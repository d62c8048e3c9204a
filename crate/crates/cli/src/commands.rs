use std::io::Write;
use std::path::{Path, PathBuf};

use serde::Serialize;

use qtask_core::qir::QirModule;
use qtask_core::sim::expectation_exact;
use qtask_core::sim::rng::mix_seed;
use qtask_core::{ghz_circuit, Histogram};
use qtask_runtime::manifest::resize_workers;
use qtask_runtime::{
    build_cut_experiment, build_uncut_experiment, submit, CutEstimate, CutExperimentConfig,
    GraphManifest, QuantumTask, ResultDump, RunHandle, RuntimeError, SubmitOptions, Task,
    TaskGraph, TimingReport, Transport, WorkerSpec,
};

use crate::manifest::{manifest_path_for, Experiment, Format, RunManifest, TransportName};
use crate::report::{CutCircuits, NoCut, ReportRow};
use crate::{CliError, Command, ExecArgs, GraphArgs, OutputArgs, ReplayArgs};

/// Result of executing a manifest.
#[derive(Debug)]
pub struct Execution {
    pub manifest: RunManifest,
    /// Set for the GHZ experiments.
    pub row: Option<ReportRow>,
    /// Set for `qir-run`.
    pub histogram: Option<Histogram>,
    pub timing: TimingReport,
    pub dump: ResultDump,
}

impl Execution {
    /// The report in the manifest's format. `qir-run` always renders JSON.
    pub fn render(&self) -> String {
        match (&self.row, &self.histogram) {
            (Some(row), _) => row.render(self.manifest.format),
            (None, Some(h)) => {
                let t = &self.timing;
                let report = QirRunReport {
                    file: self.manifest.file.as_deref().unwrap_or(Path::new("")),
                    backend: &self.manifest.backend,
                    shots: h.shots(),
                    width: h.width(),
                    histogram: h.counts(),
                    timing: Phases {
                        full_s: t.full,
                        create_s: t.create,
                        exec_post_s: t.exec_post,
                        retrieve_s: t.retrieve,
                    },
                };
                serde_json::to_string_pretty(&report).expect("report serializes") + "\n"
            }
            (None, None) => unreachable!("execution without a result"),
        }
    }
}

#[derive(Serialize)]
struct QirRunReport<'a> {
    file: &'a Path,
    backend: &'a str,
    shots: u64,
    width: usize,
    histogram: &'a std::collections::BTreeMap<String, u64>,
    timing: Phases,
}

#[derive(Serialize)]
struct Phases {
    full_s: f64,
    create_s: f64,
    exec_post_s: f64,
    retrieve_s: f64,
}

fn runtime_err(e: RuntimeError) -> CliError {
    match e {
        RuntimeError::Core(
            qtask_core::Error::InvalidArgument(_) | qtask_core::Error::ResourceLimit(_),
        ) => CliError::Usage(e.to_string()),
        e => CliError::Exec(e.to_string()),
    }
}

fn transport(name: TransportName, worker_program: &Path) -> Transport {
    match name {
        TransportName::Memory => Transport::InMemory,
        TransportName::Socket => Transport::Socket,
        TransportName::Process => Transport::Process {
            program: worker_program.to_owned(),
            args: vec!["worker".into()],
        },
    }
}

fn check_failures(handle: &RunHandle) -> Result<(), CliError> {
    let failures = handle.failures();
    match failures.first() {
        None => Ok(()),
        Some((_, name, message)) => Err(CliError::Exec(format!(
            "{} task(s) failed; first: {name}: {message}",
            failures.len()
        ))),
    }
}

/// Runs a validated manifest. `worker_program` is the executable started
/// for the process transport; it must accept `worker --backend <selector>`.
pub fn execute(m: &RunManifest, worker_program: &Path) -> Result<Execution, CliError> {
    m.validate()?;
    let options = SubmitOptions {
        transport: transport(m.transport, worker_program),
        batch: m.batch,
        ..SubmitOptions::default()
    };
    let n = m.n.unwrap_or(0);
    match m.experiment {
        Experiment::GhzCut => {
            let cfg = CutExperimentConfig {
                n,
                plan: m.cuts.clone().expect("validated"),
                shots: m.shots,
                backend: m.backend.clone(),
                seed: m.seed,
                dedup: m.dedup,
            };
            let exp = build_cut_experiment(&cfg).map_err(runtime_err)?;
            let graph = exp.graph.with_policy(m.policy.into());
            let workers = WorkerSpec::uniform(m.workers, &m.backend);
            let handle = submit(graph, &workers, options).map_err(runtime_err)?;
            check_failures(&handle)?;
            let payload = handle.fetch_result(exp.estimate).map_err(runtime_err)?;
            let est = CutEstimate::from_payload(&payload).map_err(runtime_err)?;
            let timing = handle.timing_report().map_err(runtime_err)?;
            let row = ReportRow::new(
                &m.backend,
                est.value,
                est.sigma,
                &timing,
                n,
                CutCircuits::Count(est.variant_count),
            );
            Ok(Execution {
                manifest: m.clone(),
                row: Some(row),
                histogram: None,
                dump: handle.result_dump().map_err(runtime_err)?,
                timing,
            })
        }
        Experiment::GhzNocut => {
            let (graph, mem) =
                build_uncut_experiment(n, m.shots, &m.backend, m.seed).map_err(runtime_err)?;
            let workers = WorkerSpec::uniform(1, &m.backend);
            let handle = submit(graph, &workers, options).map_err(runtime_err)?;
            check_failures(&handle)?;
            let hist = handle.fetch_histogram(mem).map_err(runtime_err)?;
            let timing = handle.timing_report().map_err(runtime_err)?;
            let (value, sigma) = if m.exact {
                let c = ghz_circuit(n).map_err(|e| CliError::Usage(e.to_string()))?;
                let v = expectation_exact::<f64>(&c).map_err(|e| CliError::Exec(e.to_string()))?;
                (v, 0.0)
            } else {
                let v = hist.parity_mean();
                (v, ((1.0 - v * v).max(0.0) / m.shots as f64).sqrt())
            };
            let row = ReportRow::new(
                &m.backend,
                value,
                sigma,
                &timing,
                n,
                CutCircuits::NoCut(NoCut::NoCut),
            );
            Ok(Execution {
                manifest: m.clone(),
                row: Some(row),
                histogram: None,
                dump: handle.result_dump().map_err(runtime_err)?,
                timing,
            })
        }
        Experiment::QirRun => {
            let path = m.file.as_deref().expect("validated");
            let text = std::fs::read_to_string(path)
                .map_err(|e| CliError::Exec(format!("cannot read {}: {e}", path.display())))?;
            let qir = QirModule::from_text(text)
                .map_err(|e| CliError::Exec(format!("{}:\n{e}", path.display())))?;
            let name = path
                .file_stem()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_else(|| "qir".into());
            let mut graph = TaskGraph::new();
            let mem = graph.create_mem(0);
            let task = QuantumTask {
                qir,
                backend: m.backend.clone(),
                shots: m.shots,
                seed: mix_seed(m.seed, 0),
            };
            graph
                .add_task(Task::quantum(name, task, mem))
                .map_err(runtime_err)?;
            let workers = WorkerSpec::uniform(1, &m.backend);
            let handle = submit(graph, &workers, options).map_err(runtime_err)?;
            check_failures(&handle)?;
            let hist = handle.fetch_histogram(mem).map_err(runtime_err)?;
            let timing = handle.timing_report().map_err(runtime_err)?;
            Ok(Execution {
                manifest: m.clone(),
                row: None,
                histogram: Some(hist),
                dump: handle.result_dump().map_err(runtime_err)?,
                timing,
            })
        }
    }
}

fn worker_program() -> Result<PathBuf, CliError> {
    std::env::current_exe()
        .map_err(|e| CliError::Exec(format!("cannot locate own executable: {e}")))
}

fn write_file(path: &Path, text: &str) -> Result<(), CliError> {
    std::fs::write(path, text)
        .map_err(|e| CliError::Exec(format!("cannot write {}: {e}", path.display())))
}

fn emit(
    exec: &Execution,
    output: Option<&Path>,
    dump: Option<&Path>,
    out: &mut dyn Write,
) -> Result<(), CliError> {
    let text = exec.render();
    match output {
        Some(path) => {
            write_file(path, &text)?;
            let mut manifest = exec.manifest.clone();
            manifest.output = Some(path.to_owned());
            write_file(&manifest_path_for(path), &manifest.to_json())?;
        }
        None => out
            .write_all(text.as_bytes())
            .map_err(|e| CliError::Exec(format!("cannot write report: {e}")))?,
    }
    if let Some(path) = dump {
        let json = serde_json::to_string_pretty(&exec.dump).expect("dump serializes") + "\n";
        write_file(path, &json)?;
    }
    Ok(())
}

fn workers_or_default(w: Option<usize>) -> usize {
    w.unwrap_or_else(qtask_runtime::default_worker_count)
}

fn manifest_from(
    experiment: Experiment,
    exec: &ExecArgs,
    shots: u64,
    format: Format,
) -> RunManifest {
    RunManifest {
        experiment,
        n: None,
        cuts: None,
        shots,
        workers: workers_or_default(exec.workers),
        policy: exec.policy,
        backend: exec.backend.clone(),
        seed: exec.seed,
        batch: exec.batch,
        dedup: false,
        exact: false,
        file: None,
        transport: exec.transport,
        format,
        output: None,
    }
}

fn run_and_emit(
    m: RunManifest,
    out_args: Option<&OutputArgs>,
    out: &mut dyn Write,
) -> Result<(), CliError> {
    let exec = execute(&m, &worker_program()?)?;
    emit(
        &exec,
        out_args.and_then(|o| o.output.as_deref()),
        out_args.and_then(|o| o.dump.as_deref()),
        out,
    )
}

pub(crate) fn dispatch(
    cmd: Command,
    out: &mut dyn Write,
    _err: &mut dyn Write,
) -> Result<(), CliError> {
    match cmd {
        Command::GhzCut(a) => {
            let mut m = manifest_from(Experiment::GhzCut, &a.exec, a.shots, a.out.format);
            m.n = Some(a.qubits);
            m.cuts = Some(a.cuts);
            m.dedup = a.dedup;
            run_and_emit(m, Some(&a.out), out)
        }
        Command::GhzNocut(a) => {
            let mut m = manifest_from(Experiment::GhzNocut, &a.exec, a.shots, a.out.format);
            m.n = Some(a.qubits);
            m.exact = a.exact;
            run_and_emit(m, Some(&a.out), out)
        }
        Command::QirRun(a) => {
            let mut m = manifest_from(Experiment::QirRun, &a.exec, a.shots, Format::Json);
            m.file = Some(std::fs::canonicalize(&a.file).unwrap_or(a.file));
            let exec = execute(&m, &worker_program()?)?;
            emit(&exec, a.output.as_deref(), a.dump.as_deref(), out)
        }
        Command::Replay(a) => replay(a, out),
        Command::Graph(a) => graph(a, out),
        Command::Worker { backend } => {
            qtask_runtime::worker::serve_stdio(&backend).map_err(|e| match e {
                RuntimeError::Core(_) => CliError::Usage(e.to_string()),
                e => CliError::Exec(e.to_string()),
            })
        }
    }
}

fn replay(a: ReplayArgs, out: &mut dyn Write) -> Result<(), CliError> {
    let mut m = RunManifest::from_path(&a.manifest)?;
    if let Some(w) = a.workers {
        m.workers = w;
    }
    if let Some(f) = a.format {
        m.format = f;
    }
    m.output = None;
    let exec = execute(&m, &worker_program()?)?;
    emit(&exec, a.output.as_deref(), a.dump.as_deref(), out)
}

fn graph(a: GraphArgs, out: &mut dyn Write) -> Result<(), CliError> {
    let manifest =
        GraphManifest::from_path(&a.manifest).map_err(|e| CliError::Usage(e.to_string()))?;
    let base = a.manifest.parent().unwrap_or(Path::new("."));
    let loaded = manifest
        .build(base)
        .map_err(|e| CliError::Usage(e.to_string()))?;
    let workers = match a.workers {
        Some(0) => return Err(CliError::Usage("workers must be at least 1".into())),
        Some(w) => resize_workers(&loaded.workers, w),
        None => loaded.workers.clone(),
    };
    let options = SubmitOptions {
        transport: transport(a.transport, &worker_program()?),
        batch: loaded.batch.max(1),
        ..SubmitOptions::default()
    };
    let handle = submit(loaded.graph, &workers, options).map_err(runtime_err)?;
    let dump = handle.result_dump().map_err(runtime_err)?;
    let json = serde_json::to_string_pretty(&dump).expect("dump serializes") + "\n";
    match &a.output {
        Some(p) => write_file(p, &json)?,
        None => out
            .write_all(json.as_bytes())
            .map_err(|e| CliError::Exec(format!("cannot write dump: {e}")))?,
    }
    check_failures(&handle)
}
