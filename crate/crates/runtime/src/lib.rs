//! Task-graph runtime for hybrid quantum/classical workloads.
//!
//! Quantum tasks carry QIR text and run on isolated workers, each owning one
//! non-reentrant backend and serving the LOAD, COMPILE, ESTIMATE_MEM, RUN,
//! FETCH verb sequence. Classical tasks call host functions by name.
//! Results flow through write-once memory objects.

pub mod cut;
mod error;
mod exec;
mod graph;
pub mod manifest;
mod mem;
pub mod protocol;
mod registry;
mod timing;
pub mod worker;

pub use cut::{
    build_cut_experiment, build_uncut_experiment, CutEstimate, CutExperiment, CutExperimentConfig,
};
pub use error::{Result, RuntimeError};
pub use exec::{
    submit, DumpedMem, ResultDump, RunHandle, SubmitOptions, TaskState, Transport, WorkerSpec,
};
pub use graph::{
    ClassicalTask, Policy, QuantumTask, Task, TaskGraph, TaskId, TaskKind, WorkerId, ANY_BACKEND,
};
pub use manifest::{GraphManifest, LoadedGraph};
pub use mem::{MemId, MemObject, Payload};
pub use registry::{FunctionRegistry, HostCall, HostFn};
pub use timing::{TaskTiming, TimingReport};

/// Environment variable overriding the worker count.
pub const WORKERS_ENV: &str = "QTASK_WORKERS";

/// Host parallelism capped at 8, unless `QTASK_WORKERS` holds a positive
/// integer.
pub fn default_worker_count() -> usize {
    if let Some(n) = std::env::var(WORKERS_ENV)
        .ok()
        .and_then(|v| v.trim().parse::<usize>().ok())
        .filter(|&n| n > 0)
    {
        return n;
    }
    std::thread::available_parallelism()
        .map(|n| n.get())
        .unwrap_or(1)
        .min(8)
}
