//! One PASS/FAIL line per acceptance criterion. Exits non-zero if any fails.

use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use num_complex::Complex64 as C;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::Value;

use qtask_cli::{
    parse_report, CutCircuits, Experiment, Format, PolicyName, RunManifest, TransportName,
};
use qtask_core::circuit::{PauliBasis, PrepState};
use qtask_core::cutting::{
    cut_ghz, decomposition_terms, enumerate_variants, fragment_estimate, fragment_exact, gamma,
    propagate_sigma, reconstruct, CutPlan, EstimateTable, FragmentEstimate, OutcomeMode,
};
use qtask_core::qir::{emit_qir, parse_qir, QirModule};
use qtask_core::sim::{self, exact_distribution, expectation_exact};
use qtask_core::{ghz_circuit, Error};
use qtask_runtime::{
    build_cut_experiment, submit, CutEstimate, CutExperimentConfig, Policy, QuantumTask,
    SubmitOptions, Task, TaskGraph, TaskState, WorkerSpec,
};

struct Outcome {
    pass: bool,
    detail: String,
}

fn check(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

type Criterion = (&'static str, Duration, fn() -> Outcome);

fn main() {
    let criteria: [Criterion; 9] = [
        ("channel identity", Duration::from_secs(1), channel_identity),
        (
            "exact reconstruction",
            Duration::from_secs(10),
            exact_reconstruction,
        ),
        ("accuracy at 1000 shots", Duration::from_secs(30), accuracy),
        (
            "sigma propagation",
            Duration::from_secs(300),
            sigma_propagation,
        ),
        ("variant count", Duration::from_secs(1), variant_count),
        (
            "cut vs no cut load",
            Duration::from_secs(300),
            load_reduction,
        ),
        (
            "runtime properties",
            Duration::from_secs(30),
            runtime_properties,
        ),
        ("qir subset", Duration::from_secs(1), qir_subset),
        (
            "cli reproduction",
            Duration::from_secs(300),
            cli_reproduction,
        ),
    ];
    let mut failed = 0;
    for (i, (name, budget, f)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let out = std::panic::catch_unwind(f).unwrap_or_else(|e| {
            let msg = e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            check(false, format!("panicked: {msg}"))
        });
        let elapsed = start.elapsed();
        let pass = out.pass && elapsed <= *budget;
        if !pass {
            failed += 1;
        }
        println!(
            "criterion {} {}: {} ({:.2}s of {}s) {}",
            i + 1,
            name,
            if pass { "PASS" } else { "FAIL" },
            elapsed.as_secs_f64(),
            budget.as_secs(),
            out.detail
        );
    }
    if failed > 0 {
        std::process::exit(1);
    }
}

type M = [[C; 2]; 2];

fn outer(v: [C; 2]) -> M {
    let mut m = [[C::default(); 2]; 2];
    for i in 0..2 {
        for j in 0..2 {
            m[i][j] = v[i] * v[j].conj();
        }
    }
    m
}

fn trace_prod(a: &M, b: &M) -> C {
    (0..2)
        .flat_map(|i| (0..2).map(move |j| a[i][j] * b[j][i]))
        .sum()
}

fn ket(p: PrepState) -> [C; 2] {
    let r = std::f64::consts::FRAC_1_SQRT_2;
    let c = C::new;
    match p {
        PrepState::Zero => [c(1.0, 0.0), c(0.0, 0.0)],
        PrepState::One => [c(0.0, 0.0), c(1.0, 0.0)],
        PrepState::Plus => [c(r, 0.0), c(r, 0.0)],
        PrepState::Minus => [c(r, 0.0), c(-r, 0.0)],
        PrepState::PlusI => [c(r, 0.0), c(0.0, r)],
        PrepState::MinusI => [c(r, 0.0), c(0.0, -r)],
    }
}

fn eigenprojectors(b: PauliBasis) -> (M, M) {
    let (p, m) = match b {
        PauliBasis::X => (PrepState::Plus, PrepState::Minus),
        PauliBasis::Y => (PrepState::PlusI, PrepState::MinusI),
        PauliBasis::Z => (PrepState::Zero, PrepState::One),
    };
    (outer(ket(p)), outer(ket(m)))
}

fn channel_identity() -> Outcome {
    let terms = decomposition_terms::<f64>();
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let mut worst: f64 = 0.0;
    for _ in 0..50 {
        // Random mixed state: pure state blended with the identity.
        let v: [C; 2] = std::array::from_fn(|_| {
            C::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
        });
        let norm = (v[0].norm_sqr() + v[1].norm_sqr()).sqrt();
        let pure = outer([v[0] / norm, v[1] / norm]);
        let p: f64 = rng.random_range(0.0..1.0);
        let mut rho = [[C::default(); 2]; 2];
        for i in 0..2 {
            for j in 0..2 {
                rho[i][j] = pure[i][j] * p
                    + if i == j {
                        C::new(0.5 * (1.0 - p), 0.0)
                    } else {
                        C::default()
                    };
            }
        }
        let mut out = [[C::default(); 2]; 2];
        for t in &terms {
            let (plus, minus) = eigenprojectors(t.measure_basis);
            let w = match t.outcome_mode {
                OutcomeMode::Eigenvalue => trace_prod(&plus, &rho) - trace_prod(&minus, &rho),
                OutcomeMode::FixedPlusOne => trace_prod(&plus, &rho) + trace_prod(&minus, &rho),
            };
            let sigma = outer(ket(t.prep_state));
            for i in 0..2 {
                for j in 0..2 {
                    out[i][j] += sigma[i][j] * w * t.coefficient;
                }
            }
        }
        for i in 0..2 {
            for j in 0..2 {
                worst = worst.max((out[i][j] - rho[i][j]).norm());
            }
        }
    }
    let g = gamma(&terms);
    check(
        worst < 1e-10 && g == 4.0,
        format!("max error {worst:.1e}, gamma {g}"),
    )
}

fn exact_table(n: usize, plan: &CutPlan) -> EstimateTable<f64> {
    let terms = decomposition_terms::<f64>();
    let frags = cut_ghz(n, plan).unwrap();
    let mut table = EstimateTable::new(plan.num_cuts()).unwrap();
    for v in enumerate_variants(&frags, &terms, true).unwrap() {
        let dist = exact_distribution::<f64>(&v.circuit).unwrap();
        for u in &v.uses {
            table.insert(u.key, fragment_exact(&dist, &u.readout).unwrap());
        }
    }
    table
}

fn exact_reconstruction() -> Outcome {
    let terms = decomposition_terms::<f64>();
    let mut worst: f64 = 0.0;
    let mut plans = 0;
    for n in 3..=6 {
        let truth = if n % 2 == 0 { 1.0 } else { 0.0 };
        let uncut = expectation_exact::<f64>(&ghz_circuit(n).unwrap()).unwrap();
        worst = worst.max((uncut - truth).abs());
        for a in 1..n {
            for b in a + 1..n {
                let plan = CutPlan::new(vec![a, b]).unwrap();
                let v = reconstruct(&exact_table(n, &plan), &terms).unwrap().value;
                worst = worst.max((v - uncut).abs());
                plans += 1;
            }
        }
    }
    check(
        worst < 1e-9,
        format!("{plans} plans, max deviation {worst:.1e}"),
    )
}

fn cut_manifest(n: usize, cuts: &str, shots: u64, seed: u64, workers: usize) -> RunManifest {
    RunManifest {
        experiment: Experiment::GhzCut,
        n: Some(n),
        cuts: Some(cuts.parse().unwrap()),
        shots,
        workers,
        policy: PolicyName::RoundRobin,
        backend: "sv".into(),
        seed,
        batch: 1,
        dedup: false,
        exact: false,
        file: None,
        transport: TransportName::Memory,
        format: Format::Json,
        output: None,
    }
}

fn worker_bin() -> PathBuf {
    PathBuf::from(env!("CARGO_BIN_EXE_qtask"))
}

fn accuracy() -> Outcome {
    let mut within_3sigma = 0;
    let mut within_5pct = 0;
    let mut values = Vec::new();
    for seed in 1..=10 {
        let exec =
            qtask_cli::execute(&cut_manifest(4, "1,2", 1000, seed, 4), &worker_bin()).unwrap();
        let row = exec.row.unwrap();
        if (row.value - 1.0).abs() <= 3.0 * row.sigma {
            within_3sigma += 1;
        }
        if (row.value - 1.0).abs() <= 0.05 {
            within_5pct += 1;
        }
        values.push(format!("{:.4}", row.value));
    }
    check(
        within_3sigma == 10 && within_5pct >= 8,
        format!(
            "{within_3sigma}/10 within 3 sigma, {within_5pct}/10 within 5%: [{}]",
            values.join(", ")
        ),
    )
}

fn sigma_propagation() -> Outcome {
    let terms = decomposition_terms::<f64>();
    let plan = CutPlan::new(vec![1, 2]).unwrap();
    let frags = cut_ghz(4, &plan).unwrap();
    let variants = enumerate_variants(&frags, &terms, false).unwrap();
    let shots = 1000;

    // Monte-Carlo oracle: spread of independently resampled reconstructions.
    let replicates = 200;
    let mut values = Vec::with_capacity(replicates);
    let mut analytic = Vec::with_capacity(replicates);
    for r in 0..replicates {
        let mut table = EstimateTable::new(2).unwrap();
        for (i, v) in variants.iter().enumerate() {
            let seed = 1_000_003 * r as u64 + i as u64;
            let h = sim::run(&v.circuit, shots, seed).unwrap();
            let u = &v.uses[0];
            table.insert(u.key, fragment_estimate(&h, &u.readout).unwrap());
        }
        let est = reconstruct(&table, &terms).unwrap();
        values.push(est.value);
        analytic.push(est.sigma);
    }
    let mean = values.iter().sum::<f64>() / replicates as f64;
    let empirical =
        (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (replicates - 1) as f64).sqrt();
    let reported = analytic.iter().sum::<f64>() / replicates as f64;
    let rel = (reported - empirical).abs() / empirical;

    // Analytic sigma at the ideal fragment values.
    let exact = exact_table(4, &plan);
    let at = |n: u64| {
        let mut t = EstimateTable::new(2).unwrap();
        for v in &variants {
            let key = v.uses[0].key;
            let value = exact.get(key).unwrap().value;
            t.insert(
                key,
                FragmentEstimate {
                    value,
                    variance: (1.0 - value * value) / n as f64,
                    shots: n,
                },
            );
        }
        propagate_sigma(&t, &terms).unwrap()
    };
    let (s1000, s4000) = (at(1000), at(4000));
    let ratio = s4000 / s1000;
    let in_band = (0.0388 / 2.0..=0.0447 * 2.0).contains(&s1000);
    check(
        rel < 0.25 && ratio == 0.5 && in_band,
        format!(
            "analytic {reported:.5} vs Monte-Carlo {empirical:.5} ({:.1}%), sigma(1000) {s1000:.5}, ratio {ratio}",
            rel * 100.0
        ),
    )
}

fn cut_config(n: usize, cuts: &str, shots: u64, seed: u64) -> CutExperimentConfig {
    CutExperimentConfig {
        n,
        plan: cuts.parse().unwrap(),
        shots,
        backend: "sv".into(),
        seed,
        dedup: false,
    }
}

fn variant_count() -> Outcome {
    let terms = decomposition_terms::<f64>();
    let two = enumerate_variants(
        &cut_ghz(4, &CutPlan::new(vec![1, 2]).unwrap()).unwrap(),
        &terms,
        false,
    )
    .unwrap()
    .len();
    let one = enumerate_variants(
        &cut_ghz(4, &CutPlan::new(vec![2]).unwrap()).unwrap(),
        &terms,
        false,
    )
    .unwrap()
    .len();
    let exp = build_cut_experiment(&cut_config(4, "1,2", 100, 0)).unwrap();
    let (tasks, edges) = (exp.graph.num_tasks(), exp.graph.num_edges());
    check(
        two == 192 && one == 16 && tasks == 193 && edges == 192,
        format!("2 cuts {two}, 1 cut {one}, graph {tasks} tasks / {edges} edges"),
    )
}

fn load_reduction() -> Outcome {
    let plan = CutPlan::new(vec![6, 13]).unwrap();
    let widths: Vec<usize> = cut_ghz(20, &plan)
        .unwrap()
        .iter()
        .map(|f| f.width())
        .collect();

    let start = Instant::now();
    let exp = build_cut_experiment(&cut_config(20, "6,13", 100, 3)).unwrap();
    let h = submit(
        exp.graph,
        &WorkerSpec::uniform(4, "sv"),
        SubmitOptions::default(),
    )
    .unwrap();
    let est = CutEstimate::from_payload(&h.fetch_result(exp.estimate).unwrap()).unwrap();
    let cut_time = start.elapsed().as_secs_f64();
    let cut_max = h.timing_report().unwrap().max_qubits().unwrap();

    let start = Instant::now();
    let (g, mem) = qtask_runtime::build_uncut_experiment(20, 100, "sv:mode=trajectory", 3).unwrap();
    let h = submit(
        g,
        &WorkerSpec::uniform(1, "sv:mode=trajectory"),
        SubmitOptions::default(),
    )
    .unwrap();
    let hist = h.fetch_histogram(mem).unwrap();
    let uncut_time = start.elapsed().as_secs_f64();
    let uncut_max = h.timing_report().unwrap().max_qubits().unwrap();

    check(
        widths == [7, 8, 7] && cut_max <= 8 && uncut_max == 20 && cut_time < uncut_time,
        format!(
            "widths {widths:?}, max statevector 2^{cut_max} vs 2^{uncut_max}, cut {cut_time:.3}s (value {:.4}) vs uncut trajectory {uncut_time:.3}s (value {:.4})",
            est.value,
            hist.parity_mean()
        ),
    )
}

fn bell_task(g: &mut TaskGraph, name: &str, backend: &str, seed: u64) -> qtask_runtime::MemId {
    let qir = emit_qir(&ghz_circuit(2).unwrap()).unwrap();
    let mem = g.create_mem(0);
    let task = QuantumTask {
        qir,
        backend: backend.into(),
        shots: 10,
        seed,
    };
    g.add_task(Task::quantum(name, task, mem)).unwrap();
    mem
}

fn runtime_properties() -> Outcome {
    let mut notes = Vec::new();

    // (a) round-robin balance.
    let exp = build_cut_experiment(&cut_config(4, "1,2", 10, 0)).unwrap();
    let h = submit(
        exp.graph,
        &WorkerSpec::uniform(4, "sv"),
        SubmitOptions::default(),
    )
    .unwrap();
    let per_worker = h.timing_report().unwrap().tasks_per_worker();
    let a = per_worker.iter().all(|&(_, c)| c == 48);
    notes.push(format!(
        "(a) {:?}",
        per_worker.iter().map(|p| p.1).collect::<Vec<_>>()
    ));

    // (b) schedule independence.
    let run = |workers: usize| {
        let exp = build_cut_experiment(&cut_config(4, "1,2", 1000, 21)).unwrap();
        let mems = exp.histograms.clone();
        let h = submit(
            exp.graph,
            &WorkerSpec::uniform(workers, "sv"),
            SubmitOptions::default(),
        )
        .unwrap();
        let est = CutEstimate::from_payload(&h.fetch_result(exp.estimate).unwrap()).unwrap();
        let hists: Vec<_> = mems
            .iter()
            .map(|&m| h.fetch_histogram(m).unwrap())
            .collect();
        (est.value.to_bits(), est.sigma.to_bits(), hists)
    };
    let reference = run(1);
    let b = run(2) == reference && run(4) == reference;
    notes.push(format!("(b) identical {b}"));

    // (c) latency-mock speedup.
    let exec_post = |workers: usize| {
        let mut g = TaskGraph::new();
        for i in 0..8 {
            bell_task(&mut g, &format!("t{i}"), "mock(sv):delay=0.2", i);
        }
        let h = submit(
            g,
            &WorkerSpec::uniform(workers, "mock(sv):delay=0.2"),
            SubmitOptions::default(),
        )
        .unwrap();
        h.timing_report().unwrap().exec_post
    };
    let speedup = exec_post(1) / exec_post(4);
    let c = (3.0..=4.5).contains(&speedup);
    notes.push(format!("(c) speedup {speedup:.2}"));

    // (d) a task that fails to compile does not block its neighbours.
    let mut g = TaskGraph::new().with_policy(Policy::LeastLoaded);
    let good: Vec<_> = (0..4)
        .map(|i| bell_task(&mut g, &format!("good{i}"), "sv", i))
        .collect();
    let bad_mem = g.create_mem(0);
    let bad = QuantumTask {
        qir: QirModule {
            text: "define void @main() #0 {\nentry:\n  br label %entry\n}\nattributes #0 = { \"entry_point\" }\n".into(),
            entry_name: "main".into(),
        },
        backend: "sv".into(),
        shots: 10,
        seed: 0,
    };
    let bad_id = g.add_task(Task::quantum("poison", bad, bad_mem)).unwrap();
    let h = submit(g, &WorkerSpec::uniform(2, "sv"), SubmitOptions::default()).unwrap();
    let d = matches!(h.task_state(bad_id), Some(TaskState::Failed { .. }))
        && good.iter().all(|&m| h.fetch_histogram(m).is_ok());
    notes.push(format!("(d) isolated {d}"));

    check(a && b && c && d, notes.join(", "))
}

fn qir_subset() -> Outcome {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("../core/tests/data/qir");
    let mut files: Vec<_> = std::fs::read_dir(&dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|x| x == "ll"))
        .collect();
    files.sort();
    let (mut valid, mut errors, mut bad) = (0, 0, Vec::new());
    for path in &files {
        let name = path.file_name().unwrap().to_string_lossy().into_owned();
        let text = std::fs::read_to_string(path).unwrap();
        if name.starts_with("err_") {
            match parse_qir(&text) {
                Err(Error::Parse(d)) if !d.is_empty() && d.iter().all(|d| d.line > 0) => {
                    errors += 1
                }
                _ => bad.push(name),
            }
        } else {
            let ok = parse_qir(&text).is_ok_and(|c| {
                let again = parse_qir(&emit_qir(&c).unwrap().text).unwrap();
                again.instructions == c.instructions && again.num_qubits == c.num_qubits
            });
            if ok {
                valid += 1;
            } else {
                bad.push(name);
            }
        }
    }
    check(
        files.len() >= 10 && bad.is_empty() && errors > 0,
        format!(
            "{} files: {valid} roundtrip, {errors} line-anchored errors, failing {bad:?}",
            files.len()
        ),
    )
}

fn cli(args: &[&str]) -> (i32, String, String) {
    let (mut out, mut err) = (Vec::new(), Vec::new());
    let code = qtask_cli::run(
        std::iter::once("qtask").chain(args.iter().copied()),
        &mut out,
        &mut err,
    );
    (
        code,
        String::from_utf8(out).unwrap(),
        String::from_utf8(err).unwrap(),
    )
}

fn cli_reproduction() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let mut notes = Vec::new();
    let mut pass = true;
    for (n, cuts, shots) in [("4", "1,2", "1000"), ("20", "6,13", "100")] {
        let report = dir.path().join(format!("ghz{n}.json"));
        let (code, _, err) = cli(&[
            "ghz-cut",
            "--qubits",
            n,
            "--cuts",
            cuts,
            "--shots",
            shots,
            "--seed",
            "7",
            "--output",
            report.to_str().unwrap(),
        ]);
        if code != 0 {
            return check(false, format!("ghz-cut n={n} exited {code}: {err}"));
        }
        let text = std::fs::read_to_string(&report).unwrap();
        let json: Value = serde_json::from_str(&text).unwrap();
        let mut keys: Vec<_> = json.as_object().unwrap().keys().cloned().collect();
        keys.sort();
        let mut expected = qtask_cli::report::COLUMNS.map(String::from).to_vec();
        expected.sort();
        let row = parse_report(&text, Format::Json).unwrap();

        let manifest = dir.path().join(format!("ghz{n}.manifest.json"));
        let (code, out, err) = cli(&[
            "replay",
            "--manifest",
            manifest.to_str().unwrap(),
            "--workers",
            "2",
        ]);
        if code != 0 {
            return check(false, format!("replay n={n} exited {code}: {err}"));
        }
        let field = |v: &Value, k: &str| v[k].to_string();
        let replayed: Value = serde_json::from_str(&out).unwrap();
        let same = field(&json, "value") == field(&replayed, "value")
            && field(&json, "sigma") == field(&replayed, "sigma");
        let ok = keys == expected && row.cut_circuits == CutCircuits::Count(192) && same;
        pass &= ok;
        notes.push(format!(
            "n={n} value {:.6} sigma {:.6} replay identical {same}",
            row.value, row.sigma
        ));
    }
    check(pass, notes.join("; "))
}
