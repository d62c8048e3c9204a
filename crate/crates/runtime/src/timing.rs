use serde::{Deserialize, Serialize};

use crate::exec::TaskState;
use crate::graph::{TaskId, WorkerId};

/// Phase durations in seconds, measured from graph creation.
///
/// `create` runs from graph creation to submit, `exec_post` from submit to
/// the last task reaching a terminal state, `retrieve` sums the time spent
/// in fetch calls, and `full` runs from graph creation to the later of the
/// last terminal task and the last fetch.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TimingReport {
    pub full: f64,
    pub create: f64,
    pub exec_post: f64,
    pub retrieve: f64,
    pub workers: Vec<WorkerId>,
    pub tasks: Vec<TaskTiming>,
}

/// Per-task timestamps in seconds since graph creation.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TaskTiming {
    pub task: TaskId,
    pub name: String,
    /// `None` for host tasks.
    pub worker: Option<WorkerId>,
    #[serde(flatten)]
    pub state: TaskState,
    pub queued_at: Option<f64>,
    pub started_at: Option<f64>,
    pub finished_at: Option<f64>,
    /// Width of the compiled circuit, for quantum tasks that compiled.
    pub qubits: Option<usize>,
}

impl TimingReport {
    /// Quantum tasks handed to each worker, in worker order.
    pub fn tasks_per_worker(&self) -> Vec<(WorkerId, usize)> {
        self.workers
            .iter()
            .map(|&w| (w, self.tasks.iter().filter(|t| t.worker == Some(w)).count()))
            .collect()
    }

    /// Largest circuit any task compiled.
    pub fn max_qubits(&self) -> Option<usize> {
        self.tasks.iter().filter_map(|t| t.qubits).max()
    }

    /// First task start to last task finish.
    pub fn makespan(&self) -> f64 {
        let start = self
            .tasks
            .iter()
            .filter_map(|t| t.started_at)
            .fold(f64::INFINITY, f64::min);
        let end = self
            .tasks
            .iter()
            .filter_map(|t| t.finished_at)
            .fold(0.0, f64::max);
        if start.is_finite() {
            (end - start).max(0.0)
        } else {
            0.0
        }
    }
}
