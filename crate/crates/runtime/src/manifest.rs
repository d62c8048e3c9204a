//! JSON description of an arbitrary task graph.
//!
//! ```json
//! {
//!   "policy": { "kind": "round-robin" },
//!   "batch": 1,
//!   "workers": [ { "id": 0, "backend": "sv" } ],
//!   "tasks": [
//!     { "name": "bell", "type": "quantum", "qir_path": "bell.ll",
//!       "backend": "sv", "shots": 100, "seed": 1, "outputs": ["h"] },
//!     { "name": "join", "type": "classical", "function": "noop",
//!       "inputs": ["h"], "outputs": ["done"] }
//!   ],
//!   "edges": [["bell", "join"]]
//! }
//! ```
//!
//! Memory objects are named by string and created on first mention.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use qtask_core::qir::QirModule;

use crate::error::{Result, RuntimeError};
use crate::exec::WorkerSpec;
use crate::graph::{ClassicalTask, Policy, QuantumTask, Task, TaskGraph, TaskId, TaskKind};
use crate::mem::MemId;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GraphManifest {
    #[serde(default)]
    pub policy: Policy,
    #[serde(default = "one")]
    pub batch: usize,
    pub workers: Vec<WorkerSpec>,
    pub tasks: Vec<TaskEntry>,
    #[serde(default)]
    pub edges: Vec<(String, String)>,
}

fn one() -> usize {
    1
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TaskEntry {
    pub name: String,
    #[serde(flatten)]
    pub kind: EntryKind,
    #[serde(default)]
    pub inputs: Vec<String>,
    #[serde(default)]
    pub outputs: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum EntryKind {
    Quantum {
        /// Inline module text; exclusive with `qir_path`.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        qir: Option<String>,
        /// Relative paths resolve against the manifest's directory.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        qir_path: Option<PathBuf>,
        backend: String,
        shots: u64,
        seed: u64,
    },
    Classical {
        function: String,
        #[serde(default)]
        params: serde_json::Value,
    },
}

/// A graph ready to submit plus the name tables needed to read it back.
#[derive(Debug)]
pub struct LoadedGraph {
    pub graph: TaskGraph,
    pub workers: Vec<WorkerSpec>,
    pub batch: usize,
    pub tasks: BTreeMap<String, TaskId>,
    pub mems: BTreeMap<String, MemId>,
}

impl GraphManifest {
    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Ok(serde_json::from_str(&text)?)
    }

    /// Builds the graph. QIR modules are parsed up front so a malformed
    /// file is reported before anything runs.
    pub fn build(&self, base_dir: &Path) -> Result<LoadedGraph> {
        if self.workers.is_empty() {
            return Err(RuntimeError::Graph("manifest lists no workers".into()));
        }
        let mut graph = TaskGraph::new().with_policy(self.policy.clone());
        let mut mems: BTreeMap<String, MemId> = BTreeMap::new();
        let mut tasks = BTreeMap::new();
        let mut mem = |graph: &mut TaskGraph, name: &str| {
            *mems
                .entry(name.to_owned())
                .or_insert_with(|| graph.create_mem(0))
        };
        for entry in &self.tasks {
            if tasks.contains_key(&entry.name) {
                return Err(RuntimeError::Graph(format!(
                    "duplicate task name {:?}",
                    entry.name
                )));
            }
            let inputs = entry.inputs.iter().map(|m| mem(&mut graph, m)).collect();
            let outputs = entry.outputs.iter().map(|m| mem(&mut graph, m)).collect();
            let kind = match &entry.kind {
                EntryKind::Quantum {
                    qir,
                    qir_path,
                    backend,
                    shots,
                    seed,
                } => {
                    let text = match (qir, qir_path) {
                        (Some(t), None) => t.clone(),
                        (None, Some(p)) => {
                            let p = base_dir.join(p);
                            std::fs::read_to_string(&p)
                                .map_err(|e| RuntimeError::Graph(format!("{}: {e}", p.display())))?
                        }
                        _ => {
                            return Err(RuntimeError::Graph(format!(
                                "task {:?} needs exactly one of qir or qir_path",
                                entry.name
                            )))
                        }
                    };
                    TaskKind::Quantum(QuantumTask {
                        qir: QirModule::from_text(text)?,
                        backend: backend.clone(),
                        shots: *shots,
                        seed: *seed,
                    })
                }
                EntryKind::Classical { function, params } => TaskKind::Classical(ClassicalTask {
                    function: function.clone(),
                    params: params.clone(),
                }),
            };
            let id = graph.add_task(Task {
                name: entry.name.clone(),
                kind,
                inputs,
                outputs,
            })?;
            tasks.insert(entry.name.clone(), id);
        }
        for (from, to) in &self.edges {
            let lookup = |n: &String| {
                tasks
                    .get(n)
                    .copied()
                    .ok_or_else(|| RuntimeError::Graph(format!("edge names unknown task {n:?}")))
            };
            graph.add_dependency(lookup(from)?, lookup(to)?)?;
        }
        Ok(LoadedGraph {
            graph,
            workers: self.workers.clone(),
            batch: self.batch,
            tasks,
            mems,
        })
    }
}

/// Resizes a worker list to `count`, cycling through the listed backends.
pub fn resize_workers(workers: &[WorkerSpec], count: usize) -> Vec<WorkerSpec> {
    (0..count)
        .map(|i| WorkerSpec::new(i, workers[i % workers.len()].backend.clone()))
        .collect()
}
