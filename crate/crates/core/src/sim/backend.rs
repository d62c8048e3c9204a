use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;
use std::thread;
use std::time::Duration;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::rng::{mix_seed, rng_from_seed, SimRng};
use super::statevector::{check_size, marginal_distribution, outcome_key, simulate, StateVector};
use crate::circuit::{Circuit, DEFAULT_MAX_QUBITS};
use crate::error::{Error, Result};
use crate::histogram::Histogram;

/// An executable quantum device.
///
/// Implementations need not be reentrant: callers hold `&mut self` and the
/// task runtime confines each instance to a single worker.
pub trait Backend: Send {
    /// Canonical selector string describing this backend.
    fn selector(&self) -> String;

    fn run(&mut self, circuit: &Circuit, shots: u64, seed: u64) -> Result<Histogram>;
}

/// Samples `shots` outcomes from the terminal distribution of `circuit`.
///
/// Terminal measurements make one multinomial draw over the final state
/// exact. The result is a pure function of `(circuit, shots, seed)`.
pub fn run(circuit: &Circuit, shots: u64, seed: u64) -> Result<Histogram> {
    if shots == 0 {
        return Err(Error::invalid("shots must be at least 1"));
    }
    let state = simulate::<f64>(circuit)?;
    let measured: Vec<usize> = circuit.measurements().map(|m| m.qubit).collect();
    let dist = marginal_distribution(&state, &measured);
    sample_distribution(&dist, measured.len(), shots, &mut rng_from_seed(seed))
}

/// Inverse-CDF sampling over a (possibly unnormalized) outcome map.
pub fn sample_distribution(
    dist: &BTreeMap<String, f64>,
    width: usize,
    shots: u64,
    rng: &mut SimRng,
) -> Result<Histogram> {
    let mut cumulative = Vec::with_capacity(dist.len());
    let mut total = 0.0;
    for (key, p) in dist {
        total += p;
        cumulative.push((total, key.as_str()));
    }
    if cumulative.is_empty() || total <= 0.0 {
        return Err(Error::Backend("empty outcome distribution".into()));
    }
    let mut counts = vec![0u64; cumulative.len()];
    for _ in 0..shots {
        let u = rng.random::<f64>() * total;
        let idx = cumulative
            .partition_point(|(c, _)| *c <= u)
            .min(cumulative.len() - 1);
        counts[idx] += 1;
    }
    Histogram::new(
        width,
        cumulative
            .iter()
            .zip(counts)
            .map(|((_, k), n)| ((*k).to_owned(), n))
            .collect(),
    )
}

/// Re-simulates the circuit and collapses each measured qubit once per shot.
fn run_trajectories(circuit: &Circuit, shots: u64, seed: u64) -> Result<Histogram> {
    if shots == 0 {
        return Err(Error::invalid("shots must be at least 1"));
    }
    let measured: Vec<usize> = circuit.measurements().map(|m| m.qubit).collect();
    let mut rng = rng_from_seed(seed);
    let mut counts = BTreeMap::new();
    for _ in 0..shots {
        let mut state: StateVector<f64> = simulate(circuit)?;
        let mut index = 0usize;
        for &q in &measured {
            let one = rng.random::<f64>() < state.probability_of_one(q);
            state.collapse(q, one);
            if one {
                index |= 1 << q;
            }
        }
        *counts.entry(outcome_key(index, &measured)).or_insert(0) += 1;
    }
    Histogram::new(measured.len(), counts)
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SamplingMode {
    /// One multinomial draw from the final state.
    #[default]
    Terminal,
    /// Full re-simulation per shot; the slow baseline.
    Trajectory,
}

#[derive(Debug)]
pub struct StatevectorBackend {
    seed: u64,
    mode: SamplingMode,
    max_qubits: usize,
}

impl StatevectorBackend {
    pub fn new(seed: u64, mode: SamplingMode) -> Self {
        StatevectorBackend {
            seed,
            mode,
            max_qubits: DEFAULT_MAX_QUBITS,
        }
    }
}

impl Backend for StatevectorBackend {
    fn selector(&self) -> String {
        BackendConfig::Statevector {
            seed: self.seed,
            mode: self.mode,
        }
        .to_string()
    }

    fn run(&mut self, circuit: &Circuit, shots: u64, seed: u64) -> Result<Histogram> {
        check_size(circuit.num_qubits, self.max_qubits)?;
        let seed = mix_seed(self.seed, seed);
        match self.mode {
            SamplingMode::Terminal => run(circuit, shots, seed),
            SamplingMode::Trajectory => run_trajectories(circuit, shots, seed),
        }
    }
}

/// Wraps another backend and sleeps once per run, emulating a remote round
/// trip. Results are exactly those of the inner backend.
pub struct LatencyMock {
    inner: Box<dyn Backend>,
    delay: f64,
    jitter: f64,
    seed: u64,
}

impl LatencyMock {
    pub fn new(inner: Box<dyn Backend>, delay: f64, jitter: f64, seed: u64) -> Self {
        LatencyMock {
            inner,
            delay,
            jitter,
            seed,
        }
    }
}

impl Backend for LatencyMock {
    fn selector(&self) -> String {
        let mut s = format!("mock({}):delay={}", self.inner.selector(), self.delay);
        if self.jitter != 0.0 {
            s.push_str(&format!(",jitter={}", self.jitter));
        }
        if self.seed != 0 {
            s.push_str(&format!(",seed={}", self.seed));
        }
        s
    }

    fn run(&mut self, circuit: &Circuit, shots: u64, seed: u64) -> Result<Histogram> {
        let extra = if self.jitter > 0.0 {
            rng_from_seed(mix_seed(self.seed, seed)).random::<f64>() * self.jitter
        } else {
            0.0
        };
        thread::sleep(Duration::from_secs_f64(self.delay + extra));
        self.inner.run(circuit, shots, seed)
    }
}

/// Parsed backend selector, e.g. `sv`, `sv:seed=3,mode=trajectory` or
/// `mock(sv):delay=0.4,jitter=0.1`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum BackendConfig {
    Statevector {
        seed: u64,
        mode: SamplingMode,
    },
    LatencyMock {
        inner: Box<BackendConfig>,
        delay: f64,
        jitter: f64,
        seed: u64,
    },
}

impl Default for BackendConfig {
    fn default() -> Self {
        BackendConfig::Statevector {
            seed: 0,
            mode: SamplingMode::Terminal,
        }
    }
}

impl BackendConfig {
    pub fn build(&self) -> Result<Box<dyn Backend>> {
        match self {
            BackendConfig::Statevector { seed, mode } => {
                Ok(Box::new(StatevectorBackend::new(*seed, *mode)))
            }
            BackendConfig::LatencyMock {
                inner,
                delay,
                jitter,
                seed,
            } => {
                if matches!(**inner, BackendConfig::LatencyMock { .. }) {
                    return Err(Error::invalid("a latency mock cannot wrap another mock"));
                }
                if !(delay.is_finite() && *delay >= 0.0 && jitter.is_finite() && *jitter >= 0.0) {
                    return Err(Error::invalid(
                        "mock delay and jitter must be finite and non-negative",
                    ));
                }
                Ok(Box::new(LatencyMock::new(
                    inner.build()?,
                    *delay,
                    *jitter,
                    *seed,
                )))
            }
        }
    }

    /// Fixed part of the per-run delay, zero for direct backends.
    pub fn base_delay(&self) -> f64 {
        match self {
            BackendConfig::Statevector { .. } => 0.0,
            BackendConfig::LatencyMock { delay, .. } => *delay,
        }
    }
}

impl fmt::Display for BackendConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BackendConfig::Statevector { seed, mode } => {
                f.write_str("sv")?;
                let mut params = Vec::new();
                if *seed != 0 {
                    params.push(format!("seed={seed}"));
                }
                if *mode == SamplingMode::Trajectory {
                    params.push("mode=trajectory".to_owned());
                }
                if !params.is_empty() {
                    write!(f, ":{}", params.join(","))?;
                }
                Ok(())
            }
            BackendConfig::LatencyMock {
                inner,
                delay,
                jitter,
                seed,
            } => {
                write!(f, "mock({inner}):delay={delay}")?;
                if *jitter != 0.0 {
                    write!(f, ",jitter={jitter}")?;
                }
                if *seed != 0 {
                    write!(f, ",seed={seed}")?;
                }
                Ok(())
            }
        }
    }
}

impl FromStr for BackendConfig {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let bad = |msg: String| Error::invalid(format!("backend selector {s:?}: {msg}"));

        if let Some(rest) = s.strip_prefix("mock(") {
            let mut depth = 1usize;
            let close = rest
                .char_indices()
                .find(|&(_, ch)| {
                    match ch {
                        '(' => depth += 1,
                        ')' => depth -= 1,
                        _ => {}
                    }
                    depth == 0
                })
                .map(|(i, _)| i)
                .ok_or_else(|| bad("unbalanced parentheses".into()))?;
            let inner: BackendConfig = rest[..close].parse()?;
            if matches!(inner, BackendConfig::LatencyMock { .. }) {
                return Err(bad("a latency mock must wrap a direct backend".into()));
            }
            let tail = &rest[close + 1..];
            let params = match tail.strip_prefix(':') {
                Some(p) => parse_params(p).map_err(bad)?,
                None if tail.is_empty() => Vec::new(),
                None => return Err(bad(format!("unexpected {tail:?} after mock(...)"))),
            };
            let (mut delay, mut jitter, mut seed) = (0.0, 0.0, 0u64);
            for (k, v) in params {
                match k {
                    "delay" => delay = parse_seconds(v).map_err(bad)?,
                    "jitter" => jitter = parse_seconds(v).map_err(bad)?,
                    "seed" => seed = v.parse().map_err(|_| bad(format!("bad seed {v:?}")))?,
                    other => return Err(bad(format!("unknown mock parameter {other:?}"))),
                }
            }
            return Ok(BackendConfig::LatencyMock {
                inner: Box::new(inner),
                delay,
                jitter,
                seed,
            });
        }

        let (kind, params) = match s.split_once(':') {
            Some((k, p)) => (k, parse_params(p).map_err(bad)?),
            None => (s, Vec::new()),
        };
        if kind != "sv" {
            return Err(bad(format!("unknown backend kind {kind:?}")));
        }
        let (mut seed, mut mode) = (0u64, SamplingMode::Terminal);
        for (k, v) in params {
            match (k, v) {
                ("seed", v) => seed = v.parse().map_err(|_| bad(format!("bad seed {v:?}")))?,
                ("mode", "terminal") => mode = SamplingMode::Terminal,
                ("mode", "trajectory") => mode = SamplingMode::Trajectory,
                (k, v) => return Err(bad(format!("unknown parameter {k}={v}"))),
            }
        }
        Ok(BackendConfig::Statevector { seed, mode })
    }
}

fn parse_params(s: &str) -> std::result::Result<Vec<(&str, &str)>, String> {
    s.split(',')
        .map(|kv| {
            kv.split_once('=')
                .map(|(k, v)| (k.trim(), v.trim()))
                .filter(|(k, v)| !k.is_empty() && !v.is_empty())
                .ok_or_else(|| format!("malformed parameter {kv:?}"))
        })
        .collect()
}

fn parse_seconds(v: &str) -> std::result::Result<f64, String> {
    match v.parse::<f64>() {
        Ok(x) if x.is_finite() && x >= 0.0 => Ok(x),
        _ => Err(format!(
            "delay values must be non-negative seconds, got {v:?}"
        )),
    }
}
