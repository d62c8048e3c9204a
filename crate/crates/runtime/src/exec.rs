use std::collections::{BTreeMap, VecDeque};
use std::path::PathBuf;
use std::process::{Child, Command, Stdio};
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::mpsc::{channel, Receiver, Sender};
use std::sync::{Arc, Condvar, Mutex, MutexGuard};
use std::thread::{self, JoinHandle};
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use qtask_core::sim::{Backend, BackendConfig};
use qtask_core::Histogram;

use crate::error::{Result, RuntimeError};
use crate::graph::{Policy, TaskGraph, TaskId, TaskKind, WorkerId, ANY_BACKEND};
use crate::mem::{MemId, MemObject, Payload};
use crate::protocol::{ReplyBody, Request, RequestBody, Verb};
use crate::registry::{FunctionRegistry, HostCall, HostFn};
use crate::timing::{TaskTiming, TimingReport};
use crate::worker::{
    worker_loop, ChannelLink, ChannelWorker, StreamLink, StreamWorker, WorkerLink,
};

/// A QPU worker and the backend it hosts.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct WorkerSpec {
    pub id: WorkerId,
    pub backend: String,
}

impl WorkerSpec {
    pub fn new(id: WorkerId, backend: impl Into<String>) -> Self {
        WorkerSpec {
            id,
            backend: backend.into(),
        }
    }

    /// `count` workers with ids `0..count`, all on `backend`.
    pub fn uniform(count: usize, backend: &str) -> Vec<Self> {
        (0..count).map(|i| WorkerSpec::new(i, backend)).collect()
    }
}

/// How the coordinator reaches its workers.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub enum Transport {
    /// Worker threads fed through in-process channels.
    #[default]
    InMemory,
    /// Worker threads behind framed byte streams over a Unix socket pair.
    Socket,
    /// One child process per worker, framed messages on stdin/stdout. The
    /// backend selector is appended as `--backend <selector>`.
    Process { program: PathBuf, args: Vec<String> },
}

#[derive(Clone, Debug)]
pub struct SubmitOptions {
    /// Block in `submit` until every task is terminal.
    pub wait: bool,
    pub transport: Transport,
    /// Round-robin placement granularity.
    pub batch: usize,
    pub registry: FunctionRegistry,
}

impl Default for SubmitOptions {
    fn default() -> Self {
        SubmitOptions {
            wait: true,
            transport: Transport::InMemory,
            batch: 1,
            registry: FunctionRegistry::with_builtins(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "state", rename_all = "lowercase")]
pub enum TaskState {
    Pending,
    Ready,
    Running,
    Done,
    Failed { message: String },
}

impl TaskState {
    pub fn is_terminal(&self) -> bool {
        matches!(self, TaskState::Done | TaskState::Failed { .. })
    }
}

#[derive(Clone, Debug)]
pub(crate) struct TaskRecord {
    pub name: String,
    pub state: TaskState,
    pub worker: Option<WorkerId>,
    pub queued_at: Option<Instant>,
    pub started_at: Option<Instant>,
    pub finished_at: Option<Instant>,
    pub qubits: Option<usize>,
}

pub(crate) struct RunState {
    pub tasks: Vec<TaskRecord>,
    pub mems: Vec<MemObject>,
    pub created_at: Instant,
    pub submitted_at: Instant,
    pub done_at: Option<Instant>,
    pub finished: bool,
    pub retrieve: Duration,
    pub last_fetch_end: Option<Instant>,
    pub workers: Vec<WorkerId>,
    pub shutdown_errors: Vec<String>,
}

struct Shared {
    state: Mutex<RunState>,
    done: Condvar,
}

impl Shared {
    fn lock(&self) -> MutexGuard<'_, RunState> {
        self.state.lock().unwrap_or_else(|e| e.into_inner())
    }
}

struct Job {
    task: TaskId,
    qir: String,
    shots: u64,
    seed: u64,
}

struct HostJob {
    task: TaskId,
    function: Arc<HostFn>,
    inputs: Vec<Payload>,
    params: serde_json::Value,
    num_outputs: usize,
}

struct QuantumOutput {
    histogram: Histogram,
    entries: u64,
    qubits: usize,
}

enum Event {
    Started(TaskId, Instant),
    Quantum(TaskId, Instant, std::result::Result<QuantumOutput, String>),
    Host(TaskId, Instant, std::result::Result<Vec<Payload>, String>),
}

/// Handle on a submitted graph.
pub struct RunHandle {
    shared: Arc<Shared>,
    scheduler: Mutex<Option<JoinHandle<()>>>,
}

enum WorkerProc {
    Thread(JoinHandle<Result<()>>),
    Child(Child),
}

fn canonical_selector(s: &str) -> String {
    s.parse::<BackendConfig>()
        .map(|c| c.to_string())
        .unwrap_or_else(|_| s.to_owned())
}

fn spawn_worker(
    spec: &WorkerSpec,
    transport: &Transport,
) -> Result<(Box<dyn WorkerLink>, WorkerProc)> {
    let config: BackendConfig = spec.backend.parse()?;
    let thread_backend = || -> Result<Box<dyn Backend>> { Ok(config.build()?) };
    let name = format!("qtask-worker-{}", spec.id);
    match transport {
        Transport::InMemory => {
            let mut backend = thread_backend()?;
            let (req_tx, req_rx) = channel();
            let (rep_tx, rep_rx) = channel();
            let h = thread::Builder::new().name(name).spawn(move || {
                let mut chan = ChannelWorker {
                    rx: req_rx,
                    tx: rep_tx,
                };
                worker_loop(&mut chan, backend.as_mut())
            })?;
            Ok((
                Box::new(ChannelLink {
                    tx: req_tx,
                    rx: rep_rx,
                }),
                WorkerProc::Thread(h),
            ))
        }
        Transport::Socket => {
            use std::os::unix::net::UnixStream;
            let mut backend = thread_backend()?;
            let (ours, theirs) = UnixStream::pair()?;
            let h = thread::Builder::new().name(name).spawn(move || {
                let mut chan = StreamWorker::new(theirs.try_clone()?, theirs);
                worker_loop(&mut chan, backend.as_mut())
            })?;
            let link = StreamLink::new(ours.try_clone()?, ours);
            Ok((Box::new(link), WorkerProc::Thread(h)))
        }
        Transport::Process { program, args } => {
            // Fail fast on selectors the child would reject.
            config.build()?;
            let mut child = Command::new(program)
                .args(args)
                .arg("--backend")
                .arg(&spec.backend)
                .stdin(Stdio::piped())
                .stdout(Stdio::piped())
                .spawn()
                .map_err(|e| {
                    RuntimeError::Worker(format!("cannot start {}: {e}", program.display()))
                })?;
            let stdin = child.stdin.take().unwrap();
            let stdout = child.stdout.take().unwrap();
            Ok((
                Box::new(StreamLink::new(stdout, stdin)),
                WorkerProc::Child(child),
            ))
        }
    }
}

fn run_job(
    link: &mut dyn WorkerLink,
    job: &Job,
    next_corr: &AtomicU64,
) -> std::result::Result<QuantumOutput, String> {
    let mut call = |body: RequestBody| -> std::result::Result<ReplyBody, String> {
        let verb = body.verb();
        let correlation = next_corr.fetch_add(1, Ordering::Relaxed);
        let reply = link
            .call(Request {
                correlation,
                task: job.task.0 as u64,
                body,
            })
            .map_err(|e| format!("{verb}: {e}"))?;
        if reply.correlation != correlation || reply.verb != verb {
            return Err(format!(
                "{verb}: reply mismatch (correlation {} for {correlation}, verb {})",
                reply.correlation, reply.verb
            ));
        }
        match reply.body {
            ReplyBody::Error { message } => Err(format!("{verb}: {message}")),
            body => Ok(body),
        }
    };
    let unexpected = |verb: Verb, body: ReplyBody| format!("{verb}: unexpected reply {body:?}");

    call(RequestBody::Load {
        qir: job.qir.clone(),
    })?;
    let qubits = match call(RequestBody::Compile)? {
        ReplyBody::Compiled { num_qubits } => num_qubits as usize,
        other => return Err(unexpected(Verb::Compile, other)),
    };
    let entries = match call(RequestBody::EstimateMem { shots: job.shots })? {
        ReplyBody::MemEstimate { entries } => entries,
        other => return Err(unexpected(Verb::EstimateMem, other)),
    };
    call(RequestBody::Run {
        shots: job.shots,
        seed: job.seed,
    })?;
    match call(RequestBody::Fetch)? {
        ReplyBody::Fetched { histogram } => Ok(QuantumOutput {
            histogram,
            entries,
            qubits,
        }),
        other => Err(unexpected(Verb::Fetch, other)),
    }
}

/// Runs `graph` on `workers`. Returns once every task is terminal when
/// `options.wait` is set, immediately otherwise.
pub fn submit(
    graph: TaskGraph,
    workers: &[WorkerSpec],
    options: SubmitOptions,
) -> Result<RunHandle> {
    let submitted_at = Instant::now();
    if workers.is_empty() {
        return Err(RuntimeError::Graph(
            "at least one worker is required".into(),
        ));
    }
    let mut ids: Vec<_> = workers.iter().map(|w| w.id).collect();
    ids.sort_unstable();
    if ids.windows(2).any(|w| w[0] == w[1]) {
        return Err(RuntimeError::Graph("duplicate worker id".into()));
    }
    graph.topological_order()?;
    if options.batch == 0 {
        return Err(RuntimeError::Graph("batch size must be at least 1".into()));
    }

    let mut links = Vec::new();
    let mut procs = Vec::new();
    for spec in workers {
        let (link, proc_) = spawn_worker(spec, &options.transport)?;
        links.push(link);
        procs.push(proc_);
    }

    let state = RunState {
        tasks: graph
            .tasks()
            .map(|(_, t)| TaskRecord {
                name: t.name.clone(),
                state: TaskState::Pending,
                worker: None,
                queued_at: None,
                started_at: None,
                finished_at: None,
                qubits: None,
            })
            .collect(),
        mems: graph
            .mems
            .iter()
            .enumerate()
            .map(|(i, &size_hint)| MemObject {
                id: MemId(i),
                size_hint,
                payload: None,
            })
            .collect(),
        created_at: graph.created_at,
        submitted_at,
        done_at: None,
        finished: false,
        retrieve: Duration::ZERO,
        last_fetch_end: None,
        workers: workers.iter().map(|w| w.id).collect(),
        shutdown_errors: Vec::new(),
    };
    let shared = Arc::new(Shared {
        state: Mutex::new(state),
        done: Condvar::new(),
    });

    let (event_tx, event_rx) = channel::<Event>();
    let next_corr = Arc::new(AtomicU64::new(1));
    let mut job_txs = Vec::new();
    let mut drivers = Vec::new();
    for (slot, mut link) in links.into_iter().enumerate() {
        let (tx, rx) = channel::<Job>();
        job_txs.push(tx);
        let events = event_tx.clone();
        let corr = Arc::clone(&next_corr);
        drivers.push(
            thread::Builder::new()
                .name(format!("qtask-driver-{slot}"))
                .spawn(move || {
                    for job in rx {
                        let _ = events.send(Event::Started(job.task, Instant::now()));
                        let out = run_job(link.as_mut(), &job, &corr);
                        let _ = events.send(Event::Quantum(job.task, Instant::now(), out));
                    }
                })?,
        );
    }
    let (host_tx, host_rx) = channel::<HostJob>();
    let host_events = event_tx.clone();
    drivers.push(
        thread::Builder::new()
            .name("qtask-host".into())
            .spawn(move || {
                for job in host_rx {
                    let _ = host_events.send(Event::Started(job.task, Instant::now()));
                    let call = HostCall {
                        inputs: &job.inputs,
                        params: &job.params,
                        num_outputs: job.num_outputs,
                    };
                    let out = (job.function)(&call);
                    let _ = host_events.send(Event::Host(job.task, Instant::now(), out));
                }
            })?,
    );
    drop(event_tx);

    let scheduler = Scheduler {
        selectors: workers
            .iter()
            .map(|w| canonical_selector(&w.backend))
            .collect(),
        outstanding: vec![0; workers.len()],
        assigned: vec![0; workers.len()],
        remaining: vec![0; graph.num_tasks()],
        rr_next: 0,
        rr_used: 0,
        waiting: VecDeque::new(),
        batch: options.batch,
        registry: options.registry,
        worker_ids: workers.iter().map(|w| w.id).collect(),
        graph,
        shared: Arc::clone(&shared),
        job_txs,
        host_tx,
    };
    let join = thread::Builder::new()
        .name("qtask-scheduler".into())
        .spawn(move || scheduler.run(event_rx, drivers, procs))?;

    let handle = RunHandle {
        shared,
        scheduler: Mutex::new(Some(join)),
    };
    if options.wait {
        handle.wait();
    }
    Ok(handle)
}

struct Scheduler {
    graph: TaskGraph,
    shared: Arc<Shared>,
    selectors: Vec<String>,
    worker_ids: Vec<WorkerId>,
    outstanding: Vec<usize>,
    assigned: Vec<usize>,
    remaining: Vec<usize>,
    rr_next: usize,
    rr_used: usize,
    batch: usize,
    /// Tasks waiting for an idle worker (late binding).
    waiting: VecDeque<TaskId>,
    registry: FunctionRegistry,
    job_txs: Vec<Sender<Job>>,
    host_tx: Sender<HostJob>,
}

impl Scheduler {
    fn run(
        mut self,
        events: Receiver<Event>,
        drivers: Vec<JoinHandle<()>>,
        procs: Vec<WorkerProc>,
    ) {
        for (_, b) in self.graph.edges() {
            self.remaining[b.0] += 1;
        }
        let total = self.graph.num_tasks();
        let mut terminal = 0;
        let initial: Vec<_> = (0..total)
            .filter(|&t| self.remaining[t] == 0)
            .map(TaskId)
            .collect();
        for t in initial {
            terminal += self.make_ready(t);
        }
        terminal += self.bind_waiting();

        while terminal < total {
            let Ok(event) = events.recv() else { break };
            terminal += self.handle(event);
            terminal += self.bind_waiting();
        }
        {
            let mut st = self.shared.lock();
            st.done_at = Some(Instant::now());
        }

        drop(self.job_txs);
        drop(self.host_tx);
        drop(events);
        for d in drivers {
            let _ = d.join();
        }
        let mut errors = Vec::new();
        for p in procs {
            match p {
                WorkerProc::Thread(h) => match h.join() {
                    Ok(Ok(())) => {}
                    Ok(Err(e)) => errors.push(e.to_string()),
                    Err(_) => errors.push("worker thread panicked".into()),
                },
                WorkerProc::Child(mut c) => match c.wait() {
                    Ok(s) if s.success() => {}
                    Ok(s) => errors.push(format!("worker process exited with {s}")),
                    Err(e) => errors.push(e.to_string()),
                },
            }
        }
        let mut st = self.shared.lock();
        st.shutdown_errors = errors;
        st.finished = true;
        self.shared.done.notify_all();
    }

    /// Returns the number of tasks that became terminal.
    fn handle(&mut self, event: Event) -> usize {
        match event {
            Event::Started(t, at) => {
                let mut st = self.shared.lock();
                let rec = &mut st.tasks[t.0];
                rec.state = TaskState::Running;
                rec.started_at = Some(at);
                0
            }
            Event::Quantum(t, at, out) => {
                if let Some(w) = self.shared.lock().tasks[t.0].worker {
                    let slot = self.worker_ids.iter().position(|&id| id == w).unwrap();
                    self.outstanding[slot] -= 1;
                }
                match out {
                    Ok(q) => {
                        let mem = self.graph.tasks[t.0].outputs[0];
                        {
                            let mut st = self.shared.lock();
                            st.mems[mem.0].size_hint = q.entries;
                            st.mems[mem.0].payload = Some(q.histogram.into());
                            st.tasks[t.0].qubits = Some(q.qubits);
                        }
                        self.complete(t, at)
                    }
                    Err(msg) => self.fail(t, at, msg),
                }
            }
            Event::Host(t, at, out) => {
                let outputs = self.graph.tasks[t.0].outputs.clone();
                match out {
                    Ok(payloads) if payloads.len() == outputs.len() => {
                        {
                            let mut st = self.shared.lock();
                            for (m, p) in outputs.iter().zip(payloads) {
                                st.mems[m.0].payload = Some(p);
                            }
                        }
                        self.complete(t, at)
                    }
                    Ok(payloads) => self.fail(
                        t,
                        at,
                        format!(
                            "host function returned {} outputs, task declares {}",
                            payloads.len(),
                            outputs.len()
                        ),
                    ),
                    Err(msg) => self.fail(t, at, msg),
                }
            }
        }
    }

    fn complete(&mut self, t: TaskId, at: Instant) -> usize {
        {
            let mut st = self.shared.lock();
            st.tasks[t.0].state = TaskState::Done;
            st.tasks[t.0].finished_at = Some(at);
        }
        let mut terminal = 1;
        let succ: Vec<_> = self.graph.successors(t).collect();
        for s in succ {
            self.remaining[s.0] -= 1;
            let pending = matches!(self.shared.lock().tasks[s.0].state, TaskState::Pending);
            if self.remaining[s.0] == 0 && pending {
                terminal += self.make_ready(s);
            }
        }
        terminal
    }

    /// Marks `t` and every transitive dependent that has not run as failed.
    fn fail(&mut self, t: TaskId, at: Instant, message: String) -> usize {
        let mut st = self.shared.lock();
        st.tasks[t.0].state = TaskState::Failed { message };
        st.tasks[t.0].finished_at = Some(at);
        let mut terminal = 1;
        let mut stack: Vec<_> = self.graph.successors(t).map(|s| (s, t)).collect();
        while let Some((s, cause)) = stack.pop() {
            if st.tasks[s.0].state.is_terminal() {
                continue;
            }
            st.tasks[s.0].state = TaskState::Failed {
                message: format!("dependency {cause} ({}) failed", st.tasks[cause.0].name),
            };
            st.tasks[s.0].finished_at = Some(at);
            terminal += 1;
            stack.extend(self.graph.successors(s).map(|n| (n, s)));
        }
        terminal
    }

    fn compatible(&self, selector: &str) -> Vec<usize> {
        if selector == ANY_BACKEND {
            return (0..self.selectors.len()).collect();
        }
        let want = canonical_selector(selector);
        (0..self.selectors.len())
            .filter(|&i| self.selectors[i] == want)
            .collect()
    }

    /// Moves `t` to Ready and dispatches or parks it. Returns 1 if it failed
    /// immediately.
    fn make_ready(&mut self, t: TaskId) -> usize {
        let now = Instant::now();
        self.shared.lock().tasks[t.0].state = TaskState::Ready;
        let task = self.graph.tasks[t.0].clone();
        match &task.kind {
            TaskKind::Classical(c) => {
                let Some(function) = self.registry.get(&c.function) else {
                    return self.fail(t, now, format!("unknown host function {:?}", c.function));
                };
                let inputs = {
                    let mut st = self.shared.lock();
                    st.tasks[t.0].queued_at = Some(now);
                    task.inputs
                        .iter()
                        .map(|m| {
                            st.mems[m.0]
                                .payload
                                .clone()
                                .expect("inputs written before ready")
                        })
                        .collect()
                };
                let _ = self.host_tx.send(HostJob {
                    task: t,
                    function,
                    inputs,
                    params: c.params.clone(),
                    num_outputs: task.outputs.len(),
                });
                0
            }
            TaskKind::Quantum(q) => {
                let candidates = self.compatible(&q.backend);
                if candidates.is_empty() {
                    return self.fail(t, now, format!("no worker runs backend {:?}", q.backend));
                }
                match &self.graph.policy {
                    Policy::RoundRobin => {
                        let n = self.selectors.len();
                        let slot = (0..n)
                            .map(|i| (self.rr_next + i) % n)
                            .find(|s| candidates.contains(s))
                            .unwrap();
                        self.rr_used += 1;
                        if self.rr_used >= self.batch {
                            self.rr_used = 0;
                            self.rr_next = (slot + 1) % n;
                        } else {
                            self.rr_next = slot;
                        }
                        self.assign(t, slot);
                        0
                    }
                    Policy::Affinity { map } if map.contains_key(&task.name) => {
                        let w = map[&task.name];
                        match self.worker_ids.iter().position(|&id| id == w) {
                            Some(slot) if candidates.contains(&slot) => {
                                self.assign(t, slot);
                                0
                            }
                            _ => self.fail(
                                t,
                                now,
                                format!("affinity worker {w} is missing or incompatible"),
                            ),
                        }
                    }
                    Policy::LeastLoaded | Policy::Affinity { .. } => {
                        self.waiting.push_back(t);
                        0
                    }
                }
            }
        }
    }

    fn bind_waiting(&mut self) -> usize {
        let mut i = 0;
        while i < self.waiting.len() {
            let t = self.waiting[i];
            let TaskKind::Quantum(q) = &self.graph.tasks[t.0].kind else {
                unreachable!("only quantum tasks wait for workers")
            };
            let best = self
                .compatible(&q.backend)
                .into_iter()
                .filter(|&s| self.outstanding[s] == 0)
                .min_by_key(|&s| (self.assigned[s], s));
            match best {
                Some(slot) => {
                    self.waiting.remove(i);
                    self.assign(t, slot);
                }
                None => i += 1,
            }
        }
        0
    }

    fn assign(&mut self, t: TaskId, slot: usize) {
        let TaskKind::Quantum(q) = &self.graph.tasks[t.0].kind else {
            unreachable!("only quantum tasks go to QPU workers")
        };
        self.outstanding[slot] += 1;
        self.assigned[slot] += 1;
        {
            let mut st = self.shared.lock();
            st.tasks[t.0].worker = Some(self.worker_ids[slot]);
            st.tasks[t.0].queued_at = Some(Instant::now());
        }
        let _ = self.job_txs[slot].send(Job {
            task: t,
            qir: q.qir.text.clone(),
            shots: q.shots,
            seed: q.seed,
        });
    }
}

impl RunHandle {
    /// Blocks until every task is terminal and all workers have shut down.
    pub fn wait(&self) {
        let mut st = self.shared.lock();
        while !st.finished {
            st = self.shared.done.wait(st).unwrap_or_else(|e| e.into_inner());
        }
        drop(st);
        if let Some(h) = self.scheduler.lock().unwrap().take() {
            let _ = h.join();
        }
    }

    pub fn is_finished(&self) -> bool {
        self.shared.lock().finished
    }

    pub fn task_state(&self, t: TaskId) -> Option<TaskState> {
        self.shared.lock().tasks.get(t.0).map(|r| r.state.clone())
    }

    /// Names and messages of failed tasks.
    pub fn failures(&self) -> Vec<(TaskId, String, String)> {
        self.shared
            .lock()
            .tasks
            .iter()
            .enumerate()
            .filter_map(|(i, r)| match &r.state {
                TaskState::Failed { message } => Some((TaskId(i), r.name.clone(), message.clone())),
                _ => None,
            })
            .collect()
    }

    /// Errors reported by workers while shutting down.
    pub fn shutdown_errors(&self) -> Vec<String> {
        self.shared.lock().shutdown_errors.clone()
    }

    /// Copy of a written memory object's payload. Time spent here counts
    /// towards the retrieve phase.
    pub fn fetch_result(&self, mem: MemId) -> Result<Payload> {
        let start = Instant::now();
        let mut st = self.shared.lock();
        let payload = st
            .mems
            .get(mem.0)
            .ok_or_else(|| RuntimeError::Graph(format!("unknown memory object {mem}")))?
            .payload
            .clone()
            .ok_or_else(|| RuntimeError::NotReady(format!("{mem} has not been written")))?;
        let end = Instant::now();
        st.retrieve += end - start;
        st.last_fetch_end = Some(end);
        Ok(payload)
    }

    pub fn fetch_histogram(&self, mem: MemId) -> Result<Histogram> {
        match self.fetch_result(mem)? {
            Payload::Histogram { histogram } => Ok(histogram),
            Payload::Bytes { .. } => Err(RuntimeError::Graph(format!("{mem} holds host bytes"))),
        }
    }

    pub fn mem_size_hint(&self, mem: MemId) -> Option<u64> {
        self.shared.lock().mems.get(mem.0).map(|m| m.size_hint)
    }

    pub fn timing_report(&self) -> Result<TimingReport> {
        let st = self.shared.lock();
        if !st.finished {
            return Err(RuntimeError::NotReady("run still in progress".into()));
        }
        let base = st.created_at;
        let secs = |t: Instant| t.saturating_duration_since(base).as_secs_f64();
        let done = st.done_at.unwrap_or(st.submitted_at);
        let end = st.last_fetch_end.map_or(done, |f| f.max(done));
        let tasks = st
            .tasks
            .iter()
            .enumerate()
            .map(|(i, r)| TaskTiming {
                task: TaskId(i),
                name: r.name.clone(),
                worker: r.worker,
                state: r.state.clone(),
                queued_at: r.queued_at.map(secs),
                started_at: r.started_at.map(secs),
                finished_at: r.finished_at.map(secs),
                qubits: r.qubits,
            })
            .collect();
        Ok(TimingReport {
            full: secs(end),
            create: secs(st.submitted_at),
            exec_post: done
                .saturating_duration_since(st.submitted_at)
                .as_secs_f64(),
            retrieve: st.retrieve.as_secs_f64(),
            workers: st.workers.clone(),
            tasks,
        })
    }

    /// Every written memory object plus the timing report.
    pub fn result_dump(&self) -> Result<ResultDump> {
        let timing = self.timing_report()?;
        let mems = self
            .shared
            .lock()
            .mems
            .iter()
            .filter_map(|m| {
                m.payload
                    .clone()
                    .map(|p| (m.id, DumpedMem::new(m.size_hint, p)))
            })
            .collect();
        Ok(ResultDump { mems, timing })
    }
}

impl Drop for RunHandle {
    fn drop(&mut self) {
        self.wait();
    }
}

/// JSON result dump: per-memory payloads and the timing report.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResultDump {
    pub mems: BTreeMap<MemId, DumpedMem>,
    pub timing: TimingReport,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum DumpedMem {
    Histogram {
        size_hint: u64,
        histogram: Histogram,
    },
    /// Host bytes that parse as JSON are embedded as-is.
    Json {
        value: serde_json::Value,
    },
    Bytes {
        bytes: Vec<u8>,
    },
}

impl DumpedMem {
    fn new(size_hint: u64, p: Payload) -> Self {
        match p {
            Payload::Histogram { histogram } => DumpedMem::Histogram {
                size_hint,
                histogram,
            },
            Payload::Bytes { bytes } => match serde_json::from_slice(&bytes) {
                Ok(value) if !bytes.is_empty() => DumpedMem::Json { value },
                _ => DumpedMem::Bytes { bytes },
            },
        }
    }
}
