use std::collections::HashSet;

use num_complex::Complex64 as C;
use qtask_core::circuit::{ghz_circuit, PauliBasis, PrepState};
use qtask_core::cutting::{
    cut_ghz, decomposition_terms, enumerate_variants, fragment_estimate, fragment_exact,
    propagate_sigma, reconstruct, CutPlan, EstimateTable, FragmentEstimate, OutcomeMode,
    VariantKey,
};
use qtask_core::sim::{self, exact_distribution, expectation_exact};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type M = [[C; 2]; 2];

fn c(re: f64, im: f64) -> C {
    C::new(re, im)
}

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

fn state(p: PrepState) -> [C; 2] {
    let r = std::f64::consts::FRAC_1_SQRT_2;
    match p {
        PrepState::Zero => [c(1.0, 0.0), c(0.0, 0.0)],
        PrepState::One => [c(0.0, 0.0), c(1.0, 0.0)],
        PrepState::Plus => [c(r, 0.0), c(r, 0.0)],
        PrepState::Minus => [c(r, 0.0), c(-r, 0.0)],
        PrepState::PlusI => [c(r, 0.0), c(0.0, r)],
        PrepState::MinusI => [c(r, 0.0), c(0.0, -r)],
    }
}

/// (+1 eigenprojector, -1 eigenprojector) of a Pauli basis.
fn projectors(b: PauliBasis) -> (M, M) {
    match b {
        PauliBasis::X => (
            outer(state(PrepState::Plus)),
            outer(state(PrepState::Minus)),
        ),
        PauliBasis::Y => (
            outer(state(PrepState::PlusI)),
            outer(state(PrepState::MinusI)),
        ),
        PauliBasis::Z => (outer(state(PrepState::Zero)), outer(state(PrepState::One))),
    }
}

fn random_density(rng: &mut ChaCha8Rng) -> M {
    // Mixture of a random pure state with the maximally mixed state.
    let v = [
        c(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)),
        c(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)),
    ];
    let norm = (v[0].norm_sqr() + v[1].norm_sqr()).sqrt();
    let pure = outer([v[0] / norm, v[1] / norm]);
    let p: f64 = rng.random_range(0.0..1.0);
    let mut m = [[C::default(); 2]; 2];
    for i in 0..2 {
        for j in 0..2 {
            let id = if i == j { 0.5 } else { 0.0 };
            m[i][j] = pure[i][j] * p + c(id * (1.0 - p), 0.0);
        }
    }
    m
}

#[test]
fn decomposition_reproduces_random_states() {
    let terms = decomposition_terms::<f64>();
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    for _ in 0..50 {
        let rho = random_density(&mut rng);
        let mut out = [[C::default(); 2]; 2];
        for t in &terms {
            let (p_plus, p_minus) = projectors(t.measure_basis);
            let weight = match t.outcome_mode {
                OutcomeMode::Eigenvalue => trace_prod(&p_plus, &rho) - trace_prod(&p_minus, &rho),
                OutcomeMode::FixedPlusOne => trace_prod(&p_plus, &rho) + trace_prod(&p_minus, &rho),
            };
            let sigma = outer(state(t.prep_state));
            for i in 0..2 {
                for j in 0..2 {
                    out[i][j] += sigma[i][j] * weight * t.coefficient;
                }
            }
        }
        for i in 0..2 {
            for j in 0..2 {
                assert!((out[i][j] - rho[i][j]).norm() < 1e-12, "{out:?} vs {rho:?}");
            }
        }
    }
}

#[test]
fn variant_counts() {
    let terms = decomposition_terms::<f64>();
    let two = cut_ghz(20, &CutPlan::new(vec![6, 13]).unwrap()).unwrap();
    let all = enumerate_variants(&two, &terms, false).unwrap();
    assert_eq!(all.len(), 192);
    let names: HashSet<_> = all.iter().map(|v| v.name.clone()).collect();
    assert_eq!(names.len(), 192);
    for f in 0..3 {
        assert_eq!(all.iter().filter(|v| v.fragment == f).count(), 64);
    }

    let one = cut_ghz(6, &CutPlan::new(vec![3]).unwrap()).unwrap();
    assert_eq!(enumerate_variants(&one, &terms, false).unwrap().len(), 16);
}

#[test]
fn dedup_matches_text_hash_oracle() {
    let terms = decomposition_terms::<f64>();
    for (n, plan) in [(4, vec![1, 2]), (20, vec![6, 13]), (7, vec![3])] {
        let frags = cut_ghz(n, &CutPlan::new(plan).unwrap()).unwrap();
        let all = enumerate_variants(&frags, &terms, false).unwrap();
        let unique: HashSet<(usize, String)> = all
            .iter()
            .map(|v| (v.fragment, v.circuit.body_text()))
            .collect();
        let dedup = enumerate_variants(&frags, &terms, true).unwrap();
        assert_eq!(dedup.len(), unique.len(), "n={n}");
        let served: usize = dedup.iter().map(|v| v.uses.len()).sum();
        assert_eq!(served, all.len());
    }
    let frags = cut_ghz(4, &CutPlan::new(vec![1, 2]).unwrap()).unwrap();
    assert_eq!(enumerate_variants(&frags, &terms, true).unwrap().len(), 27);
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

#[test]
fn exact_reconstruction_matches_uncut() {
    let terms = decomposition_terms::<f64>();
    for n in 3..=6 {
        let uncut = expectation_exact::<f64>(&ghz_circuit(n).unwrap()).unwrap();
        let expected = if n % 2 == 0 { 1.0 } else { 0.0 };
        assert!((uncut - expected).abs() < 1e-12);
        let mut plans = Vec::new();
        for a in 1..n {
            plans.push(vec![a]);
            for b in a + 1..n {
                plans.push(vec![a, b]);
            }
        }
        for plan in plans {
            let plan = CutPlan::new(plan).unwrap();
            let est = reconstruct(&exact_table(n, &plan), &terms).unwrap();
            assert!(
                (est.value - expected).abs() < 1e-9,
                "n={n} plan={plan}: {}",
                est.value
            );
            assert_eq!(est.sigma, 0.0);
        }
    }
}

#[test]
fn exact_fragment_values_ghz4() {
    let t = exact_table(4, &CutPlan::new(vec![1, 2]).unwrap());
    let a: Vec<f64> = (0..8)
        .map(|k| t.get(VariantKey::new(0, Some(k), Some(0))).unwrap().value)
        .collect();
    let expect_a = [0.0, 0.0, 0.0, 0.0, 1.0, 1.0, 0.0, 0.0];
    for (x, y) in a.iter().zip(expect_a) {
        assert!((x - y).abs() < 1e-12, "{a:?}");
    }
    for s in 0..8 {
        let v = t.get(VariantKey::new(2, Some(0), Some(s))).unwrap().value;
        assert!((v - 1.0).abs() < 1e-12);
    }
    let b = |k, s| t.get(VariantKey::new(1, Some(k), Some(s))).unwrap().value;
    assert!((b(5, 4) - 1.0).abs() < 1e-12);
    assert!((b(5, 6) + 1.0).abs() < 1e-12);
    assert!((b(4, 6) - 1.0).abs() < 1e-12);
    assert!(b(0, 0).abs() < 1e-12);
}

/// Table with every one of the 192 slots as its own entry, each with the
/// exact GHZ(4) fragment value and binomial variance at `shots`.
fn independent_table(shots: u64) -> EstimateTable<f64> {
    let exact = exact_table(4, &CutPlan::new(vec![1, 2]).unwrap());
    let mut t = EstimateTable::new(2).unwrap();
    for f in 0..3 {
        for k in 0..8 {
            for s in 0..8 {
                let key = VariantKey::new(f, Some(k), Some(s));
                let value = exact.get(key).unwrap().value;
                let variance = (1.0 - value * value) / shots as f64;
                t.insert(
                    key,
                    FragmentEstimate {
                        value,
                        variance,
                        shots,
                    },
                );
            }
        }
    }
    t
}

#[test]
fn sigma_matches_finite_difference_gradient() {
    let terms = decomposition_terms::<f64>();
    let shots = 1000;
    let base = independent_table(shots);
    let sigma = propagate_sigma(&base, &terms).unwrap();

    // Numerical gradient of the reconstruction w.r.t. each entry.
    let h = 1e-6;
    let mut var = 0.0;
    for f in 0..3 {
        for k in 0..8 {
            for s in 0..8 {
                let key = VariantKey::new(f, Some(k), Some(s));
                let e = *base.get(key).unwrap();
                let mut t = independent_table(shots);
                t.insert(
                    key,
                    FragmentEstimate {
                        value: e.value + h,
                        ..e
                    },
                );
                let up = reconstruct(&t, &terms).unwrap().value;
                t.insert(
                    key,
                    FragmentEstimate {
                        value: e.value - h,
                        ..e
                    },
                );
                let down = reconstruct(&t, &terms).unwrap().value;
                let g = (up - down) / (2.0 * h);
                var += g * g * e.variance;
            }
        }
    }
    assert!(
        (sigma - var.sqrt()).abs() < 1e-6,
        "{sigma} vs {}",
        var.sqrt()
    );
    // Closed form for GHZ(4) with cuts (1,2): 24 non-zero gradient terms of
    // weight 1/16 each at variance 1/N, i.e. sqrt(1.5 / N).
    assert!(
        (sigma - (1.5f64 / shots as f64).sqrt()).abs() < 1e-9,
        "{sigma}"
    );
}

#[test]
fn shared_first_fragment_reduces_to_outer_sum() {
    // One A_k and one C_s per term (no per-tuple repeats): sigma is the
    // usual sum over the three fragment families.
    let terms = decomposition_terms::<f64>();
    let exact = exact_table(4, &CutPlan::new(vec![1, 2]).unwrap());
    let shots = 1000.0;
    let mut t = EstimateTable::new(2).unwrap();
    let est = |value: f64| FragmentEstimate {
        value,
        variance: (1.0 - value * value) / shots,
        shots: 1000,
    };
    for k in 0..8 {
        let a = exact
            .get(VariantKey::new(0, Some(k), Some(0)))
            .unwrap()
            .value;
        let cval = exact
            .get(VariantKey::new(2, Some(0), Some(k)))
            .unwrap()
            .value;
        t.insert(VariantKey::new(0, Some(k), None), est(a));
        t.insert(VariantKey::new(2, None, Some(k)), est(cval));
        for s in 0..8 {
            let b = exact
                .get(VariantKey::new(1, Some(k), Some(s)))
                .unwrap()
                .value;
            t.insert(VariantKey::new(1, Some(k), Some(s)), est(b));
        }
    }
    let r = reconstruct(&t, &terms).unwrap();
    assert!((r.value - 1.0).abs() < 1e-12);

    let (mut var_a, mut var_b, mut var_c) = (0.0, 0.0, 0.0);
    let v = |f, k, s| t.get(VariantKey::new(f, Some(k), Some(s))).unwrap();
    for k in 0..8 {
        let mut ga = 0.0;
        let mut gc = 0.0;
        for s in 0..8 {
            let w = terms[k].coefficient * terms[s].coefficient;
            ga += w * v(1, k, s).value * v(2, k, s).value;
            gc += terms[s].coefficient * terms[k].coefficient * v(0, s, k).value * v(1, s, k).value;
            let gb = w * v(0, k, s).value * v(2, k, s).value;
            var_b += gb * gb * v(1, k, s).variance;
        }
        var_a += ga * ga * v(0, k, 0).variance;
        var_c += gc * gc * v(2, 0, k).variance;
    }
    let oracle = (var_a + var_b + var_c).sqrt();
    assert!((r.sigma - oracle).abs() < 1e-12, "{} vs {oracle}", r.sigma);
}

#[test]
fn sampled_reconstruction_is_close() {
    let terms = decomposition_terms::<f64>();
    let frags = cut_ghz(4, &CutPlan::new(vec![1, 2]).unwrap()).unwrap();
    let mut t = EstimateTable::new(2).unwrap();
    for (i, v) in enumerate_variants(&frags, &terms, false)
        .unwrap()
        .iter()
        .enumerate()
    {
        let h = sim::run(&v.circuit, 1000, 11 + i as u64).unwrap();
        let u = &v.uses[0];
        t.insert(u.key, fragment_estimate(&h, &u.readout).unwrap());
    }
    let r = reconstruct(&t, &terms).unwrap();
    assert!(r.sigma > 0.02 && r.sigma < 0.06, "{}", r.sigma);
    assert!((r.value - 1.0).abs() < 5.0 * r.sigma, "{r:?}");
}
