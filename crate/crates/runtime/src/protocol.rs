//! Worker messages and their framed binary encoding.
//!
//! Frame (all integers little-endian):
//!
//! ```text
//! u32  length of everything after this field
//! u8   version (1)
//! u8   kind: 0 request, 1 ok reply, 2 error reply
//! u64  correlation id
//! u64  task id
//! u8   verb: 1 LOAD, 2 COMPILE, 3 ESTIMATE_MEM, 4 RUN, 5 FETCH
//! ...  payload
//! ```

use std::collections::BTreeMap;
use std::fmt;
use std::io::{self, Read, Write};

use qtask_core::Histogram;

use crate::error::{Result, RuntimeError};

pub const PROTOCOL_VERSION: u8 = 1;
/// Upper bound on a frame body; larger length prefixes are rejected.
pub const MAX_FRAME: u32 = 64 << 20;

const KIND_REQUEST: u8 = 0;
const KIND_OK: u8 = 1;
const KIND_ERROR: u8 = 2;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Verb {
    Load = 1,
    Compile = 2,
    EstimateMem = 3,
    Run = 4,
    Fetch = 5,
}

impl Verb {
    pub const SEQUENCE: [Verb; 5] = [
        Verb::Load,
        Verb::Compile,
        Verb::EstimateMem,
        Verb::Run,
        Verb::Fetch,
    ];

    fn from_u8(v: u8) -> Result<Self> {
        Ok(match v {
            1 => Verb::Load,
            2 => Verb::Compile,
            3 => Verb::EstimateMem,
            4 => Verb::Run,
            5 => Verb::Fetch,
            other => return Err(RuntimeError::Protocol(format!("unknown verb {other}"))),
        })
    }

    /// The verb that must precede this one for the same task.
    pub fn predecessor(self) -> Option<Verb> {
        let i = self as usize - 1;
        i.checked_sub(1).map(|j| Verb::SEQUENCE[j])
    }
}

impl fmt::Display for Verb {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Verb::Load => "LOAD",
            Verb::Compile => "COMPILE",
            Verb::EstimateMem => "ESTIMATE_MEM",
            Verb::Run => "RUN",
            Verb::Fetch => "FETCH",
        })
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum RequestBody {
    Load { qir: String },
    Compile,
    EstimateMem { shots: u64 },
    Run { shots: u64, seed: u64 },
    Fetch,
}

impl RequestBody {
    pub fn verb(&self) -> Verb {
        match self {
            RequestBody::Load { .. } => Verb::Load,
            RequestBody::Compile => Verb::Compile,
            RequestBody::EstimateMem { .. } => Verb::EstimateMem,
            RequestBody::Run { .. } => Verb::Run,
            RequestBody::Fetch => Verb::Fetch,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Request {
    pub correlation: u64,
    pub task: u64,
    pub body: RequestBody,
}

#[derive(Clone, Debug, PartialEq)]
pub enum ReplyBody {
    Loaded,
    /// Qubit count of the compiled circuit.
    Compiled {
        num_qubits: u32,
    },
    /// Upper bound on histogram entries.
    MemEstimate {
        entries: u64,
    },
    Ran,
    Fetched {
        histogram: Histogram,
    },
    Error {
        message: String,
    },
}

#[derive(Clone, Debug, PartialEq)]
pub struct Reply {
    pub correlation: u64,
    pub task: u64,
    pub verb: Verb,
    pub body: ReplyBody,
}

impl Reply {
    pub fn error(req: &Request, message: impl Into<String>) -> Self {
        Reply {
            correlation: req.correlation,
            task: req.task,
            verb: req.body.verb(),
            body: ReplyBody::Error {
                message: message.into(),
            },
        }
    }
}

struct Writer(Vec<u8>);

impl Writer {
    fn header(kind: u8, correlation: u64, task: u64, verb: Verb) -> Self {
        let mut w = Writer(Vec::with_capacity(64));
        w.0.extend_from_slice(&[0; 4]);
        w.u8(PROTOCOL_VERSION);
        w.u8(kind);
        w.u64(correlation);
        w.u64(task);
        w.u8(verb as u8);
        w
    }
    fn u8(&mut self, v: u8) {
        self.0.push(v);
    }
    fn u32(&mut self, v: u32) {
        self.0.extend_from_slice(&v.to_le_bytes());
    }
    fn u64(&mut self, v: u64) {
        self.0.extend_from_slice(&v.to_le_bytes());
    }
    fn bytes(&mut self, b: &[u8]) {
        self.u32(b.len() as u32);
        self.0.extend_from_slice(b);
    }
    fn finish(mut self) -> Vec<u8> {
        let len = (self.0.len() - 4) as u32;
        self.0[..4].copy_from_slice(&len.to_le_bytes());
        self.0
    }
}

struct Reader<'a> {
    buf: &'a [u8],
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.buf.len() < n {
            return Err(RuntimeError::Protocol("truncated frame".into()));
        }
        let (head, rest) = self.buf.split_at(n);
        self.buf = rest;
        Ok(head)
    }
    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }
    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }
    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
    fn string(&mut self) -> Result<String> {
        let n = self.u32()? as usize;
        String::from_utf8(self.take(n)?.to_vec())
            .map_err(|_| RuntimeError::Protocol("string field is not UTF-8".into()))
    }
    fn end(&self) -> Result<()> {
        if self.buf.is_empty() {
            Ok(())
        } else {
            Err(RuntimeError::Protocol(format!(
                "{} trailing bytes in frame",
                self.buf.len()
            )))
        }
    }
}

/// Fixed header fields shared by requests and replies.
struct Header {
    kind: u8,
    correlation: u64,
    task: u64,
    verb: Verb,
}

fn read_header(r: &mut Reader<'_>) -> Result<Header> {
    let version = r.u8()?;
    if version != PROTOCOL_VERSION {
        return Err(RuntimeError::Protocol(format!(
            "unsupported protocol version {version}"
        )));
    }
    Ok(Header {
        kind: r.u8()?,
        correlation: r.u64()?,
        task: r.u64()?,
        verb: Verb::from_u8(r.u8()?)?,
    })
}

pub fn encode_request(req: &Request) -> Vec<u8> {
    let mut w = Writer::header(KIND_REQUEST, req.correlation, req.task, req.body.verb());
    match &req.body {
        RequestBody::Load { qir } => w.bytes(qir.as_bytes()),
        RequestBody::Compile | RequestBody::Fetch => {}
        RequestBody::EstimateMem { shots } => w.u64(*shots),
        RequestBody::Run { shots, seed } => {
            w.u64(*shots);
            w.u64(*seed);
        }
    }
    w.finish()
}

/// Decodes a frame body (without the length prefix).
pub fn decode_request(body: &[u8]) -> Result<Request> {
    let mut r = Reader { buf: body };
    let h = read_header(&mut r)?;
    if h.kind != KIND_REQUEST {
        return Err(RuntimeError::Protocol(format!(
            "expected a request, got kind {}",
            h.kind
        )));
    }
    let body = match h.verb {
        Verb::Load => RequestBody::Load { qir: r.string()? },
        Verb::Compile => RequestBody::Compile,
        Verb::EstimateMem => RequestBody::EstimateMem { shots: r.u64()? },
        Verb::Run => RequestBody::Run {
            shots: r.u64()?,
            seed: r.u64()?,
        },
        Verb::Fetch => RequestBody::Fetch,
    };
    r.end()?;
    Ok(Request {
        correlation: h.correlation,
        task: h.task,
        body,
    })
}

pub fn encode_reply(reply: &Reply) -> Vec<u8> {
    let kind = match reply.body {
        ReplyBody::Error { .. } => KIND_ERROR,
        _ => KIND_OK,
    };
    let mut w = Writer::header(kind, reply.correlation, reply.task, reply.verb);
    match &reply.body {
        ReplyBody::Loaded | ReplyBody::Ran => {}
        ReplyBody::Compiled { num_qubits } => w.u32(*num_qubits),
        ReplyBody::MemEstimate { entries } => w.u64(*entries),
        ReplyBody::Fetched { histogram } => {
            w.u32(histogram.width() as u32);
            w.u32(histogram.counts().len() as u32);
            for (bits, &count) in histogram.counts() {
                w.0.extend_from_slice(bits.as_bytes());
                w.u64(count);
            }
        }
        ReplyBody::Error { message } => w.bytes(message.as_bytes()),
    }
    w.finish()
}

pub fn decode_reply(body: &[u8]) -> Result<Reply> {
    let mut r = Reader { buf: body };
    let h = read_header(&mut r)?;
    let body = match (h.kind, h.verb) {
        (KIND_ERROR, _) => ReplyBody::Error {
            message: r.string()?,
        },
        (KIND_OK, Verb::Load) => ReplyBody::Loaded,
        (KIND_OK, Verb::Compile) => ReplyBody::Compiled {
            num_qubits: r.u32()?,
        },
        (KIND_OK, Verb::EstimateMem) => ReplyBody::MemEstimate { entries: r.u64()? },
        (KIND_OK, Verb::Run) => ReplyBody::Ran,
        (KIND_OK, Verb::Fetch) => {
            let width = r.u32()? as usize;
            let n = r.u32()? as usize;
            let mut counts = BTreeMap::new();
            for _ in 0..n {
                let bits = std::str::from_utf8(r.take(width)?)
                    .map_err(|_| RuntimeError::Protocol("bitstring is not ASCII".into()))?
                    .to_owned();
                counts.insert(bits, r.u64()?);
            }
            ReplyBody::Fetched {
                histogram: Histogram::new(width, counts)
                    .map_err(|e| RuntimeError::Protocol(format!("bad histogram: {e}")))?,
            }
        }
        (kind, _) => {
            return Err(RuntimeError::Protocol(format!(
                "expected a reply, got kind {kind}"
            )))
        }
    };
    r.end()?;
    Ok(Reply {
        correlation: h.correlation,
        task: h.task,
        verb: h.verb,
        body,
    })
}

/// Writes one already-encoded frame (length prefix included).
pub fn write_frame(w: &mut impl Write, frame: &[u8]) -> io::Result<()> {
    w.write_all(frame)?;
    w.flush()
}

/// Reads one frame body. `Ok(None)` on a clean end of stream.
pub fn read_frame(r: &mut impl Read) -> Result<Option<Vec<u8>>> {
    let mut len = [0u8; 4];
    match r.read_exact(&mut len) {
        Ok(()) => {}
        Err(e) if e.kind() == io::ErrorKind::UnexpectedEof => return Ok(None),
        Err(e) => return Err(e.into()),
    }
    let len = u32::from_le_bytes(len);
    if len > MAX_FRAME {
        return Err(RuntimeError::Protocol(format!(
            "frame of {len} bytes exceeds limit"
        )));
    }
    let mut body = vec![0u8; len as usize];
    r.read_exact(&mut body)?;
    Ok(Some(body))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn roundtrip_request(req: Request) {
        let frame = encode_request(&req);
        let body = read_frame(&mut &frame[..]).unwrap().unwrap();
        assert_eq!(decode_request(&body).unwrap(), req);
    }

    #[test]
    fn request_layout() {
        let req = Request {
            correlation: 0x0102,
            task: 7,
            body: RequestBody::Run {
                shots: 100,
                seed: 9,
            },
        };
        let frame = encode_request(&req);
        assert_eq!(&frame[..4], &(frame.len() as u32 - 4).to_le_bytes());
        assert_eq!(frame[4], 1);
        assert_eq!(frame[5], 0);
        assert_eq!(&frame[6..14], &0x0102u64.to_le_bytes());
        assert_eq!(frame[22], 4);
        assert_eq!(frame.len(), 4 + 19 + 16);
        roundtrip_request(req);
    }

    #[test]
    fn reply_roundtrip() {
        let histogram = Histogram::from_pairs(2, [("00", 40), ("11", 60)]).unwrap();
        for body in [
            ReplyBody::Loaded,
            ReplyBody::Compiled { num_qubits: 3 },
            ReplyBody::MemEstimate { entries: 4 },
            ReplyBody::Ran,
            ReplyBody::Fetched { histogram },
            ReplyBody::Error {
                message: "line 3: error: boom".into(),
            },
        ] {
            let verb = match body {
                ReplyBody::Loaded | ReplyBody::Error { .. } => Verb::Load,
                ReplyBody::Compiled { .. } => Verb::Compile,
                ReplyBody::MemEstimate { .. } => Verb::EstimateMem,
                ReplyBody::Ran => Verb::Run,
                ReplyBody::Fetched { .. } => Verb::Fetch,
            };
            let reply = Reply {
                correlation: 5,
                task: 1,
                verb,
                body,
            };
            let frame = encode_reply(&reply);
            assert_eq!(decode_reply(&frame[4..]).unwrap(), reply);
        }
    }

    #[test]
    fn rejects_bad_frames() {
        let req = Request {
            correlation: 1,
            task: 1,
            body: RequestBody::Compile,
        };
        let mut frame = encode_request(&req);
        frame[4] = 2;
        assert!(decode_request(&frame[4..])
            .unwrap_err()
            .to_string()
            .contains("version"));
        frame[4] = 1;
        frame[22] = 9;
        assert!(decode_request(&frame[4..]).is_err());
        frame[22] = 2;
        let mut long = frame[4..].to_vec();
        long.push(0);
        assert!(decode_request(&long)
            .unwrap_err()
            .to_string()
            .contains("trailing"));
        assert!(decode_request(&frame[4..10])
            .unwrap_err()
            .to_string()
            .contains("truncated"));
        assert!(decode_reply(&frame[4..]).is_err());
        assert!(read_frame(&mut &[][..]).unwrap().is_none());
        let huge = (MAX_FRAME + 1).to_le_bytes();
        assert!(read_frame(&mut &huge[..]).is_err());
    }

    #[test]
    fn verb_order() {
        assert_eq!(Verb::Load.predecessor(), None);
        assert_eq!(Verb::Fetch.predecessor(), Some(Verb::Run));
        assert_eq!(Verb::EstimateMem.to_string(), "ESTIMATE_MEM");
    }

    proptest! {
        #[test]
        fn requests_roundtrip(corr: u64, task: u64, shots: u64, seed: u64, text in ".{0,200}", pick in 0u8..5) {
            let body = match pick {
                0 => RequestBody::Load { qir: text },
                1 => RequestBody::Compile,
                2 => RequestBody::EstimateMem { shots },
                3 => RequestBody::Run { shots, seed },
                _ => RequestBody::Fetch,
            };
            roundtrip_request(Request { correlation: corr, task, body });
        }

        #[test]
        fn garbage_never_panics(bytes in proptest::collection::vec(any::<u8>(), 0..64)) {
            let _ = decode_request(&bytes);
            let _ = decode_reply(&bytes);
        }
    }
}
