use thiserror::Error;

pub type Result<T, E = RuntimeError> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum RuntimeError {
    /// Unknown ids, cycles, duplicate producers.
    #[error("graph error: {0}")]
    Graph(String),
    #[error("not ready: {0}")]
    NotReady(String),
    #[error("protocol error: {0}")]
    Protocol(String),
    #[error("worker error: {0}")]
    Worker(String),
    #[error("task {task} failed: {message}")]
    TaskFailed { task: usize, message: String },
    #[error(transparent)]
    Core(#[from] qtask_core::Error),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}
