use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use qtask_core::qir::QirModule;

use crate::error::{Result, RuntimeError};
use crate::mem::MemId;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct TaskId(pub usize);

impl fmt::Display for TaskId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "task{}", self.0)
    }
}

pub type WorkerId = usize;

/// Selector that matches every worker.
pub const ANY_BACKEND: &str = "*";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QuantumTask {
    pub qir: QirModule,
    pub backend: String,
    pub shots: u64,
    pub seed: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClassicalTask {
    /// Name in the function registry.
    pub function: String,
    #[serde(default)]
    pub params: serde_json::Value,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum TaskKind {
    Quantum(QuantumTask),
    Classical(ClassicalTask),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Task {
    pub name: String,
    pub kind: TaskKind,
    #[serde(default)]
    pub inputs: Vec<MemId>,
    #[serde(default)]
    pub outputs: Vec<MemId>,
}

impl Task {
    /// Quantum task writing its histogram to `output`.
    pub fn quantum(name: impl Into<String>, task: QuantumTask, output: MemId) -> Self {
        Task {
            name: name.into(),
            kind: TaskKind::Quantum(task),
            inputs: Vec::new(),
            outputs: vec![output],
        }
    }

    pub fn classical(
        name: impl Into<String>,
        function: impl Into<String>,
        params: serde_json::Value,
        inputs: Vec<MemId>,
        outputs: Vec<MemId>,
    ) -> Self {
        Task {
            name: name.into(),
            kind: TaskKind::Classical(ClassicalTask {
                function: function.into(),
                params,
            }),
            inputs,
            outputs,
        }
    }

    pub fn is_quantum(&self) -> bool {
        matches!(self.kind, TaskKind::Quantum(_))
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Policy {
    /// Cyclic placement in readiness order. The pointer advances after every
    /// `batch` tasks.
    #[default]
    RoundRobin,
    /// Bind a ready task to the idle compatible worker with the fewest tasks
    /// so far; tasks wait centrally while every worker is busy.
    LeastLoaded,
    /// Fixed placement by task name; unmapped tasks fall back to
    /// least-loaded.
    Affinity { map: BTreeMap<String, WorkerId> },
}

impl fmt::Display for Policy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Policy::RoundRobin => "round-robin",
            Policy::LeastLoaded => "least-loaded",
            Policy::Affinity { .. } => "affinity",
        })
    }
}

/// Directed acyclic graph of tasks connected by single-producer memory
/// objects. Consumers of a memory object depend on its producer implicitly.
#[derive(Clone, Debug)]
pub struct TaskGraph {
    pub(crate) tasks: Vec<Task>,
    pub(crate) edges: BTreeSet<(TaskId, TaskId)>,
    pub(crate) mems: Vec<u64>,
    producers: BTreeMap<MemId, TaskId>,
    pub policy: Policy,
    pub(crate) created_at: Instant,
}

impl Default for TaskGraph {
    fn default() -> Self {
        Self::new()
    }
}

impl TaskGraph {
    pub fn new() -> Self {
        TaskGraph {
            tasks: Vec::new(),
            edges: BTreeSet::new(),
            mems: Vec::new(),
            producers: BTreeMap::new(),
            policy: Policy::default(),
            created_at: Instant::now(),
        }
    }

    pub fn with_policy(mut self, policy: Policy) -> Self {
        self.policy = policy;
        self
    }

    /// Allocates an unwritten memory object.
    pub fn create_mem(&mut self, size_hint: u64) -> MemId {
        self.mems.push(size_hint);
        MemId(self.mems.len() - 1)
    }

    pub fn add_task(&mut self, task: Task) -> Result<TaskId> {
        let id = TaskId(self.tasks.len());
        for &m in task.inputs.iter().chain(&task.outputs) {
            if m.0 >= self.mems.len() {
                return Err(RuntimeError::Graph(format!("unknown memory object {m}")));
            }
        }
        if task.is_quantum() && (task.outputs.len() != 1 || !task.inputs.is_empty()) {
            return Err(RuntimeError::Graph(format!(
                "quantum task {:?} must have no inputs and exactly one output",
                task.name
            )));
        }
        let mut seen = BTreeSet::new();
        for &m in &task.outputs {
            if let Some(p) = self.producers.get(&m) {
                return Err(RuntimeError::Graph(format!("{m} already has producer {p}")));
            }
            if !seen.insert(m) {
                return Err(RuntimeError::Graph(format!(
                    "{m} listed twice as an output"
                )));
            }
            if task.inputs.contains(&m) {
                return Err(RuntimeError::Graph(format!("{m} is both input and output")));
            }
        }
        // Implicit edges, in both directions: producers already known and
        // consumers added earlier.
        let mut implied = Vec::new();
        for m in &task.inputs {
            if let Some(&p) = self.producers.get(m) {
                implied.push((p, id));
            }
        }
        for (t, other) in self.tasks.iter().enumerate() {
            if other.inputs.iter().any(|m| task.outputs.contains(m)) {
                implied.push((id, TaskId(t)));
            }
        }
        self.tasks.push(task);
        for (from, to) in implied {
            if let Err(e) = self.add_dependency(from, to) {
                self.tasks.pop();
                self.edges.retain(|&(a, b)| a != id && b != id);
                return Err(e);
            }
        }
        for &m in &self.tasks[id.0].outputs {
            self.producers.insert(m, id);
        }
        Ok(id)
    }

    /// Adds `from -> to`; rejects unknown ids and edges that close a cycle.
    pub fn add_dependency(&mut self, from: TaskId, to: TaskId) -> Result<()> {
        for t in [from, to] {
            if t.0 >= self.tasks.len() {
                return Err(RuntimeError::Graph(format!("unknown task {t}")));
            }
        }
        if from == to || self.reaches(to, from) {
            return Err(RuntimeError::Graph(format!(
                "edge {from} -> {to} would create a cycle"
            )));
        }
        self.edges.insert((from, to));
        Ok(())
    }

    fn reaches(&self, start: TaskId, goal: TaskId) -> bool {
        let mut stack = vec![start];
        let mut seen = BTreeSet::new();
        while let Some(t) = stack.pop() {
            if t == goal {
                return true;
            }
            if seen.insert(t) {
                stack.extend(self.successors(t));
            }
        }
        false
    }

    pub fn successors(&self, t: TaskId) -> impl Iterator<Item = TaskId> + '_ {
        self.edges
            .range((t, TaskId(0))..=(t, TaskId(usize::MAX)))
            .map(|&(_, b)| b)
    }

    pub fn num_tasks(&self) -> usize {
        self.tasks.len()
    }

    pub fn num_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn num_mems(&self) -> usize {
        self.mems.len()
    }

    pub fn task(&self, id: TaskId) -> Option<&Task> {
        self.tasks.get(id.0)
    }

    pub fn tasks(&self) -> impl Iterator<Item = (TaskId, &Task)> {
        self.tasks.iter().enumerate().map(|(i, t)| (TaskId(i), t))
    }

    pub fn edges(&self) -> impl Iterator<Item = (TaskId, TaskId)> + '_ {
        self.edges.iter().copied()
    }

    pub fn producer(&self, mem: MemId) -> Option<TaskId> {
        self.producers.get(&mem).copied()
    }

    /// Tasks with no outgoing edges.
    pub fn sinks(&self) -> Vec<TaskId> {
        let has_out: BTreeSet<_> = self.edges.iter().map(|&(a, _)| a).collect();
        (0..self.tasks.len())
            .map(TaskId)
            .filter(|t| !has_out.contains(t))
            .collect()
    }

    /// Kahn's algorithm; errors on a cycle or an input nobody produces.
    pub fn topological_order(&self) -> Result<Vec<TaskId>> {
        for (id, task) in self.tasks() {
            if let Some(m) = task.inputs.iter().find(|m| !self.producers.contains_key(m)) {
                return Err(RuntimeError::Graph(format!(
                    "{id} reads {m}, which has no producer"
                )));
            }
        }
        let mut indegree = vec![0usize; self.tasks.len()];
        for &(_, b) in &self.edges {
            indegree[b.0] += 1;
        }
        let mut ready: Vec<TaskId> = (0..self.tasks.len())
            .filter(|&i| indegree[i] == 0)
            .map(TaskId)
            .rev()
            .collect();
        let mut order = Vec::with_capacity(self.tasks.len());
        while let Some(t) = ready.pop() {
            order.push(t);
            for s in self.successors(t) {
                indegree[s.0] -= 1;
                if indegree[s.0] == 0 {
                    ready.push(s);
                }
            }
        }
        if order.len() != self.tasks.len() {
            return Err(RuntimeError::Graph("task graph contains a cycle".into()));
        }
        Ok(order)
    }
}
