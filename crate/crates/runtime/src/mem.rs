use serde::{Deserialize, Serialize};

use qtask_core::Histogram;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct MemId(pub usize);

impl std::fmt::Display for MemId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "mem{}", self.0)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Payload {
    Histogram { histogram: Histogram },
    Bytes { bytes: Vec<u8> },
}

impl Payload {
    pub fn as_histogram(&self) -> Option<&Histogram> {
        match self {
            Payload::Histogram { histogram } => Some(histogram),
            Payload::Bytes { .. } => None,
        }
    }

    pub fn as_bytes(&self) -> Option<&[u8]> {
        match self {
            Payload::Bytes { bytes } => Some(bytes),
            Payload::Histogram { .. } => None,
        }
    }
}

impl From<Histogram> for Payload {
    fn from(histogram: Histogram) -> Self {
        Payload::Histogram { histogram }
    }
}

impl From<Vec<u8>> for Payload {
    fn from(bytes: Vec<u8>) -> Self {
        Payload::Bytes { bytes }
    }
}

/// A write-once buffer connecting a producing task to its consumers.
#[derive(Clone, Debug, PartialEq)]
pub struct MemObject {
    pub id: MemId,
    /// Expected number of histogram entries, filled from the worker's
    /// memory estimate.
    pub size_hint: u64,
    pub payload: Option<Payload>,
}
