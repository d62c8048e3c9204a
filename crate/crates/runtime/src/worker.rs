//! The isolated QPU worker: one non-reentrant backend behind a serial
//! message loop.

use std::collections::HashMap;
use std::io::{BufReader, BufWriter, Read, Write};
use std::sync::mpsc::{Receiver, Sender};

use qtask_core::qir::parse_module;
use qtask_core::sim::{estimate_output_size, Backend, BackendConfig};
use qtask_core::{Circuit, Histogram};

use crate::error::{Result, RuntimeError};
use crate::protocol::{
    decode_reply, decode_request, encode_reply, encode_request, read_frame, write_frame, Reply,
    ReplyBody, Request, RequestBody, Verb,
};

/// Worker side of a transport.
pub trait WorkerChannel {
    /// Next request, or `None` once the coordinator hung up.
    fn recv(&mut self) -> Result<Option<Request>>;
    fn send(&mut self, reply: Reply) -> Result<()>;
}

/// Coordinator side of a transport: one request, one reply.
pub trait WorkerLink: Send {
    fn call(&mut self, req: Request) -> Result<Reply>;
}

#[derive(Default)]
struct Session {
    last: Option<Verb>,
    qir: String,
    circuit: Option<Circuit>,
    histogram: Option<Histogram>,
}

/// Serves requests in arrival order until the channel closes. Verbs for a
/// task must arrive as LOAD, COMPILE, ESTIMATE_MEM, RUN, FETCH; anything
/// else gets an error reply and leaves the session untouched.
pub fn worker_loop(channel: &mut impl WorkerChannel, backend: &mut dyn Backend) -> Result<()> {
    let mut sessions: HashMap<u64, Session> = HashMap::new();
    while let Some(req) = channel.recv()? {
        let reply = match handle(&mut sessions, backend, &req) {
            Ok(body) => Reply {
                correlation: req.correlation,
                task: req.task,
                verb: req.body.verb(),
                body,
            },
            Err(message) => Reply::error(&req, message),
        };
        channel.send(reply)?;
    }
    Ok(())
}

fn handle(
    sessions: &mut HashMap<u64, Session>,
    backend: &mut dyn Backend,
    req: &Request,
) -> std::result::Result<ReplyBody, String> {
    let verb = req.body.verb();
    let last = sessions.get(&req.task).and_then(|s| s.last);
    if last != verb.predecessor() {
        let after = last.map_or_else(|| "nothing".to_owned(), |v| v.to_string());
        return Err(format!(
            "protocol error: {verb} after {after} for task {}",
            req.task
        ));
    }
    let session = sessions.entry(req.task).or_default();
    let body = match &req.body {
        RequestBody::Load { qir } => {
            if qir.trim().is_empty() {
                return Err("empty QIR module".into());
            }
            session.qir = qir.clone();
            ReplyBody::Loaded
        }
        RequestBody::Compile => {
            let parsed = parse_module(&session.qir).map_err(|e| e.to_string())?;
            let num_qubits = parsed.circuit.num_qubits as u32;
            session.circuit = Some(parsed.circuit);
            ReplyBody::Compiled { num_qubits }
        }
        RequestBody::EstimateMem { shots } => ReplyBody::MemEstimate {
            entries: estimate_output_size(session.circuit.as_ref().unwrap(), *shots),
        },
        RequestBody::Run { shots, seed } => {
            let circuit = session.circuit.as_ref().unwrap();
            session.histogram = Some(
                backend
                    .run(circuit, *shots, *seed)
                    .map_err(|e| e.to_string())?,
            );
            ReplyBody::Ran
        }
        RequestBody::Fetch => {
            let histogram = sessions.remove(&req.task).unwrap().histogram.unwrap();
            return Ok(ReplyBody::Fetched { histogram });
        }
    };
    session.last = Some(verb);
    Ok(body)
}

/// In-memory transport: a pair of typed channels.
pub struct ChannelWorker {
    pub rx: Receiver<Request>,
    pub tx: Sender<Reply>,
}

impl WorkerChannel for ChannelWorker {
    fn recv(&mut self) -> Result<Option<Request>> {
        Ok(self.rx.recv().ok())
    }
    fn send(&mut self, reply: Reply) -> Result<()> {
        self.tx
            .send(reply)
            .map_err(|_| RuntimeError::Worker("coordinator hung up".into()))
    }
}

pub struct ChannelLink {
    pub tx: Sender<Request>,
    pub rx: Receiver<Reply>,
}

impl WorkerLink for ChannelLink {
    fn call(&mut self, req: Request) -> Result<Reply> {
        self.tx
            .send(req)
            .map_err(|_| RuntimeError::Worker("worker hung up".into()))?;
        self.rx
            .recv()
            .map_err(|_| RuntimeError::Worker("worker exited before replying".into()))
    }
}

/// Byte-stream transport speaking framed messages.
pub struct StreamWorker<R: Read, W: Write> {
    reader: BufReader<R>,
    writer: BufWriter<W>,
}

impl<R: Read, W: Write> StreamWorker<R, W> {
    pub fn new(reader: R, writer: W) -> Self {
        StreamWorker {
            reader: BufReader::new(reader),
            writer: BufWriter::new(writer),
        }
    }
}

impl<R: Read, W: Write> WorkerChannel for StreamWorker<R, W> {
    fn recv(&mut self) -> Result<Option<Request>> {
        match read_frame(&mut self.reader)? {
            Some(body) => decode_request(&body).map(Some),
            None => Ok(None),
        }
    }
    fn send(&mut self, reply: Reply) -> Result<()> {
        Ok(write_frame(&mut self.writer, &encode_reply(&reply))?)
    }
}

pub struct StreamLink<R: Read + Send, W: Write + Send> {
    reader: BufReader<R>,
    writer: BufWriter<W>,
}

impl<R: Read + Send, W: Write + Send> StreamLink<R, W> {
    pub fn new(reader: R, writer: W) -> Self {
        StreamLink {
            reader: BufReader::new(reader),
            writer: BufWriter::new(writer),
        }
    }
}

impl<R: Read + Send, W: Write + Send> WorkerLink for StreamLink<R, W> {
    fn call(&mut self, req: Request) -> Result<Reply> {
        write_frame(&mut self.writer, &encode_request(&req))?;
        let body = read_frame(&mut self.reader)?
            .ok_or_else(|| RuntimeError::Worker("worker closed the stream".into()))?;
        decode_reply(&body)
    }
}

/// Entry point for a worker running as a separate process: builds the
/// backend from `selector` and serves frames on stdin/stdout.
pub fn serve_stdio(selector: &str) -> Result<()> {
    let config: BackendConfig = selector.parse()?;
    let mut backend = config.build()?;
    let stdin = std::io::stdin();
    let stdout = std::io::stdout();
    let mut chan = StreamWorker::new(stdin.lock(), stdout.lock());
    worker_loop(&mut chan, backend.as_mut())
}
