//! GHZ wire-cutting experiments as task graphs: one quantum task per
//! fragment variant feeding a classical reconstruction sink.

use serde::{Deserialize, Serialize};

use qtask_core::cutting::{
    cut_ghz, decomposition_terms, enumerate_variants, fragment_estimate, reconstruct, CutPlan,
    EstimateTable, Readout, VariantUse,
};
use qtask_core::qir::emit_qir;
use qtask_core::sim::rng::mix_seed;
use qtask_core::{ghz_circuit, Histogram};

use crate::error::{Result, RuntimeError};
use crate::graph::{QuantumTask, Task, TaskGraph, TaskId};
use crate::mem::{MemId, Payload};
use crate::registry::HostCall;

/// Registry name of the reconstruction host function.
pub const RECONSTRUCT_FN: &str = "cut.reconstruct";

/// Reconstructed `<Z...Z>` as written by the sink task.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CutEstimate {
    pub value: f64,
    pub sigma: f64,
    /// Shots per variant circuit.
    pub shots: u64,
    pub n: usize,
    pub cuts: Vec<usize>,
    pub variant_count: usize,
}

impl CutEstimate {
    pub fn from_payload(p: &Payload) -> Result<Self> {
        let bytes = p
            .as_bytes()
            .ok_or_else(|| RuntimeError::Graph("estimate payload is a histogram".into()))?;
        Ok(serde_json::from_slice(bytes)?)
    }
}

#[derive(Serialize, Deserialize)]
struct ReconstructParams {
    n: usize,
    cuts: Vec<usize>,
    shots: u64,
    /// Table slots served by each input, in input order.
    uses: Vec<Vec<VariantUse>>,
}

#[derive(Clone, Debug)]
pub struct CutExperimentConfig {
    pub n: usize,
    pub plan: CutPlan,
    pub shots: u64,
    pub backend: String,
    pub seed: u64,
    pub dedup: bool,
}

#[derive(Debug)]
pub struct CutExperiment {
    pub graph: TaskGraph,
    pub variant_tasks: Vec<TaskId>,
    pub histograms: Vec<MemId>,
    pub sink: TaskId,
    pub estimate: MemId,
}

impl CutExperiment {
    pub fn variant_count(&self) -> usize {
        self.variant_tasks.len()
    }
}

/// Builds the graph; task `i` gets seed `mix_seed(seed, i)`, so results do
/// not depend on placement.
pub fn build_cut_experiment(cfg: &CutExperimentConfig) -> Result<CutExperiment> {
    if cfg.shots == 0 {
        return Err(qtask_core::Error::invalid("shots must be at least 1").into());
    }
    let fragments = cut_ghz(cfg.n, &cfg.plan)?;
    let terms = decomposition_terms::<f64>();
    let variants = enumerate_variants(&fragments, &terms, cfg.dedup)?;

    let mut graph = TaskGraph::new();
    let mut variant_tasks = Vec::with_capacity(variants.len());
    let mut histograms = Vec::with_capacity(variants.len());
    let mut uses = Vec::with_capacity(variants.len());
    for (i, v) in variants.into_iter().enumerate() {
        let qir = emit_qir(&v.circuit)?;
        let mem = graph.create_mem(0);
        let task = QuantumTask {
            qir,
            backend: cfg.backend.clone(),
            shots: cfg.shots,
            seed: mix_seed(cfg.seed, i as u64),
        };
        variant_tasks.push(graph.add_task(Task::quantum(v.name, task, mem))?);
        histograms.push(mem);
        uses.push(v.uses);
    }
    let params = ReconstructParams {
        n: cfg.n,
        cuts: cfg.plan.positions().to_vec(),
        shots: cfg.shots,
        uses,
    };
    let estimate = graph.create_mem(1);
    let sink = graph.add_task(Task::classical(
        "reconstruct",
        RECONSTRUCT_FN,
        serde_json::to_value(params)?,
        histograms.clone(),
        vec![estimate],
    ))?;
    Ok(CutExperiment {
        graph,
        variant_tasks,
        histograms,
        sink,
        estimate,
    })
}

/// Single-task graph running the uncut `n`-qubit GHZ circuit.
pub fn build_uncut_experiment(
    n: usize,
    shots: u64,
    backend: &str,
    seed: u64,
) -> Result<(TaskGraph, MemId)> {
    let circuit = ghz_circuit(n)?;
    let mut graph = TaskGraph::new();
    let mem = graph.create_mem(0);
    let task = QuantumTask {
        qir: emit_qir(&circuit)?,
        backend: backend.to_owned(),
        shots,
        seed: mix_seed(seed, 0),
    };
    graph.add_task(Task::quantum(circuit.name.clone(), task, mem))?;
    Ok((graph, mem))
}

/// Host function behind [`RECONSTRUCT_FN`]. Slots of one input that share a
/// readout share one table entry.
pub fn reconstruct_host(call: &HostCall<'_>) -> std::result::Result<Vec<Payload>, String> {
    let params: ReconstructParams =
        serde_json::from_value(call.params.clone()).map_err(|e| format!("bad parameters: {e}"))?;
    if params.uses.len() != call.inputs.len() {
        return Err(format!(
            "{} inputs but {} slot lists",
            call.inputs.len(),
            params.uses.len()
        ));
    }
    let mut table = EstimateTable::<f64>::new(params.cuts.len()).map_err(|e| e.to_string())?;
    for (payload, uses) in call.inputs.iter().zip(&params.uses) {
        let histogram: &Histogram = payload
            .as_histogram()
            .ok_or("reconstruction inputs must be histograms")?;
        let mut groups: Vec<(&Readout, Vec<_>)> = Vec::new();
        for u in uses {
            match groups.iter_mut().find(|(r, _)| *r == &u.readout) {
                Some((_, keys)) => keys.push(u.key),
                None => groups.push((&u.readout, vec![u.key])),
            }
        }
        for (readout, keys) in groups {
            let est = fragment_estimate::<f64>(histogram, readout).map_err(|e| e.to_string())?;
            table.insert_shared(keys, est);
        }
    }
    let terms = decomposition_terms::<f64>();
    let est = reconstruct(&table, &terms).map_err(|e| e.to_string())?;
    let out = CutEstimate {
        value: est.value,
        sigma: est.sigma,
        shots: params.shots,
        n: params.n,
        cuts: params.cuts,
        variant_count: call.inputs.len(),
    };
    let bytes = serde_json::to_vec(&out).map_err(|e| e.to_string())?;
    Ok(vec![Payload::from(bytes); call.num_outputs])
}
