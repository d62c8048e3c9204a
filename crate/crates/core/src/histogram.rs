use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Bitstring counts from a finite-shot run.
///
/// Bit `i` of every key is the outcome of the `i`-th measurement of the
/// circuit that produced it.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "RawHistogram")]
pub struct Histogram {
    counts: BTreeMap<String, u64>,
    shots: u64,
    width: usize,
}

#[derive(Deserialize)]
struct RawHistogram {
    counts: BTreeMap<String, u64>,
    shots: u64,
    width: usize,
}

impl TryFrom<RawHistogram> for Histogram {
    type Error = Error;

    fn try_from(raw: RawHistogram) -> Result<Self> {
        let h = Histogram::new(raw.width, raw.counts)?;
        if h.shots != raw.shots {
            return Err(Error::invalid(format!(
                "histogram declares {} shots but counts sum to {}",
                raw.shots, h.shots
            )));
        }
        Ok(h)
    }
}

impl Histogram {
    /// Builds a histogram, checking key width, alphabet and a positive total.
    /// Zero counts are dropped.
    pub fn new(width: usize, counts: BTreeMap<String, u64>) -> Result<Self> {
        let mut shots = 0u64;
        for key in counts.keys() {
            if key.len() != width || !key.bytes().all(|b| b == b'0' || b == b'1') {
                return Err(Error::invalid(format!(
                    "histogram key {key:?} is not a {width}-bit string"
                )));
            }
        }
        let counts: BTreeMap<_, _> = counts.into_iter().filter(|(_, c)| *c > 0).collect();
        for c in counts.values() {
            shots = shots
                .checked_add(*c)
                .ok_or_else(|| Error::invalid("histogram shot total overflows"))?;
        }
        if shots == 0 {
            return Err(Error::invalid("histogram must contain at least one shot"));
        }
        Ok(Histogram {
            counts,
            shots,
            width,
        })
    }

    pub fn from_pairs<'a>(
        width: usize,
        pairs: impl IntoIterator<Item = (&'a str, u64)>,
    ) -> Result<Self> {
        let mut counts = BTreeMap::new();
        for (k, c) in pairs {
            *counts.entry(k.to_owned()).or_insert(0) += c;
        }
        Histogram::new(width, counts)
    }

    pub fn counts(&self) -> &BTreeMap<String, u64> {
        &self.counts
    }

    pub fn shots(&self) -> u64 {
        self.shots
    }

    /// Number of measured bits per key.
    pub fn width(&self) -> usize {
        self.width
    }

    pub fn get(&self, key: &str) -> u64 {
        self.counts.get(key).copied().unwrap_or(0)
    }

    pub fn frequency(&self, key: &str) -> f64 {
        self.get(key) as f64 / self.shots as f64
    }

    /// Empirical mean of the full-register parity.
    pub fn parity_mean(&self) -> f64 {
        let signed: i128 = self
            .counts
            .iter()
            .map(|(k, c)| {
                let ones = k.bytes().filter(|b| *b == b'1').count();
                if ones % 2 == 0 {
                    *c as i128
                } else {
                    -(*c as i128)
                }
            })
            .sum();
        signed as f64 / self.shots as f64
    }
}
