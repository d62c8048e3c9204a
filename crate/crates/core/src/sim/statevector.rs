use std::collections::BTreeMap;

use num_complex::Complex;

use crate::circuit::{Circuit, Gate, DEFAULT_MAX_QUBITS};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Dense pure state over `num_qubits` qubits. Qubit 0 is the least
/// significant bit of the amplitude index.
#[derive(Clone, Debug, PartialEq)]
pub struct StateVector<T> {
    num_qubits: usize,
    amplitudes: Vec<Complex<T>>,
}

type Matrix2<T> = [[Complex<T>; 2]; 2];

impl<T: Scalar> StateVector<T> {
    /// |0...0> on `num_qubits` qubits.
    pub fn zero(num_qubits: usize) -> Result<Self> {
        check_size(num_qubits, DEFAULT_MAX_QUBITS)?;
        let mut amplitudes = vec![Complex::new(T::zero(), T::zero()); 1usize << num_qubits];
        amplitudes[0] = Complex::new(T::one(), T::zero());
        Ok(StateVector {
            num_qubits,
            amplitudes,
        })
    }

    pub fn num_qubits(&self) -> usize {
        self.num_qubits
    }

    pub fn amplitudes(&self) -> &[Complex<T>] {
        &self.amplitudes
    }

    pub fn norm_sqr(&self) -> T {
        self.amplitudes.iter().map(|a| a.norm_sqr()).sum()
    }

    pub fn probabilities(&self) -> Vec<T> {
        self.amplitudes.iter().map(|a| a.norm_sqr()).collect()
    }

    pub fn apply(&mut self, gate: &Gate) {
        match *gate {
            Gate::X(q) => self.for_pairs(q, std::mem::swap),
            Gate::Z(q) => self.phase(q, Complex::new(-T::one(), T::zero())),
            Gate::S(q) => self.phase(q, Complex::new(T::zero(), T::one())),
            Gate::Sdg(q) => self.phase(q, Complex::new(T::zero(), -T::one())),
            Gate::Cnot { control, target } => {
                let (c, t) = (1usize << control, 1usize << target);
                for i in 0..self.amplitudes.len() {
                    if i & c != 0 && i & t == 0 {
                        self.amplitudes.swap(i, i | t);
                    }
                }
            }
            Gate::H(q) => self.apply_matrix(q, hadamard()),
            Gate::Y(q) => self.apply_matrix(q, pauli_y()),
            Gate::Rx(q, a) => self.apply_matrix(q, rx(T::from_f64_lossy(a))),
            Gate::Ry(q, a) => self.apply_matrix(q, ry(T::from_f64_lossy(a))),
            Gate::Rz(q, a) => self.apply_matrix(q, rz(T::from_f64_lossy(a))),
        }
    }

    /// Visits every amplitude pair `(i, i | 1<<q)` with bit `q` of `i` clear.
    fn for_pairs(&mut self, q: usize, mut f: impl FnMut(&mut Complex<T>, &mut Complex<T>)) {
        let stride = 1usize << q;
        for block in self.amplitudes.chunks_mut(stride << 1) {
            let (lo, hi) = block.split_at_mut(stride);
            for (a, b) in lo.iter_mut().zip(hi.iter_mut()) {
                f(a, b);
            }
        }
    }

    fn phase(&mut self, q: usize, phase: Complex<T>) {
        self.for_pairs(q, |_, b| *b *= phase);
    }

    fn apply_matrix(&mut self, q: usize, m: Matrix2<T>) {
        self.for_pairs(q, |a, b| {
            let (x, y) = (*a, *b);
            *a = m[0][0] * x + m[0][1] * y;
            *b = m[1][0] * x + m[1][1] * y;
        });
    }

    pub fn probability_of_one(&self, q: usize) -> T {
        let mask = 1usize << q;
        self.amplitudes
            .iter()
            .enumerate()
            .filter(|(i, _)| i & mask != 0)
            .map(|(_, a)| a.norm_sqr())
            .sum()
    }

    /// Projects qubit `q` onto `outcome` and renormalizes. Returns the
    /// probability the outcome had before collapse.
    pub fn collapse(&mut self, q: usize, outcome: bool) -> T {
        let mask = 1usize << q;
        let p: T = self
            .amplitudes
            .iter()
            .enumerate()
            .filter(|(i, _)| (i & mask != 0) == outcome)
            .map(|(_, a)| a.norm_sqr())
            .sum();
        let scale = if p > T::zero() {
            T::one() / p.sqrt()
        } else {
            T::zero()
        };
        for (i, a) in self.amplitudes.iter_mut().enumerate() {
            if (i & mask != 0) == outcome {
                *a = a.scale(scale);
            } else {
                *a = Complex::new(T::zero(), T::zero());
            }
        }
        p
    }
}

fn c<T: Scalar>(re: T, im: T) -> Complex<T> {
    Complex::new(re, im)
}

fn hadamard<T: Scalar>() -> Matrix2<T> {
    let h = T::one() / (T::one() + T::one()).sqrt();
    let z = T::zero();
    [[c(h, z), c(h, z)], [c(h, z), c(-h, z)]]
}

fn pauli_y<T: Scalar>() -> Matrix2<T> {
    let (o, z) = (T::one(), T::zero());
    [[c(z, z), c(z, -o)], [c(z, o), c(z, z)]]
}

fn rx<T: Scalar>(theta: T) -> Matrix2<T> {
    let (cos, sin) = ((theta * T::half()).cos(), (theta * T::half()).sin());
    let z = T::zero();
    [[c(cos, z), c(z, -sin)], [c(z, -sin), c(cos, z)]]
}

fn ry<T: Scalar>(theta: T) -> Matrix2<T> {
    let (cos, sin) = ((theta * T::half()).cos(), (theta * T::half()).sin());
    let z = T::zero();
    [[c(cos, z), c(-sin, z)], [c(sin, z), c(cos, z)]]
}

fn rz<T: Scalar>(theta: T) -> Matrix2<T> {
    let half = theta * T::half();
    let z = T::zero();
    [
        [c(half.cos(), -half.sin()), c(z, z)],
        [c(z, z), c(half.cos(), half.sin())],
    ]
}

pub(crate) fn check_size(num_qubits: usize, max_qubits: usize) -> Result<()> {
    if num_qubits > max_qubits {
        Err(Error::ResourceLimit(format!(
            "{num_qubits} qubits exceeds the {max_qubits}-qubit simulator bound"
        )))
    } else {
        Ok(())
    }
}

fn check_circuit(circuit: &Circuit) -> Result<()> {
    check_size(circuit.num_qubits, DEFAULT_MAX_QUBITS)?;
    circuit.validate_with_limit(usize::MAX).into_result()
}

/// Applies preparations, gates and measurement basis rotations to |0...0>.
/// No collapse is performed.
pub fn simulate<T: Scalar>(circuit: &Circuit) -> Result<StateVector<T>> {
    check_circuit(circuit)?;
    let mut state = StateVector::zero(circuit.num_qubits)?;
    for g in circuit.lowered().gates() {
        state.apply(g);
    }
    Ok(state)
}

/// Measured-qubit indices of the circuit, in measurement order.
fn measured_qubits(circuit: &Circuit) -> Vec<usize> {
    circuit.measurements().map(|m| m.qubit).collect()
}

pub(crate) fn outcome_key(index: usize, measured: &[usize]) -> String {
    measured
        .iter()
        .map(|&q| if index >> q & 1 == 1 { '1' } else { '0' })
        .collect()
}

/// Terminal outcome distribution, marginalized onto the measured qubits in
/// measurement order. Numerically-zero outcomes are omitted.
pub fn exact_distribution<T: Scalar>(circuit: &Circuit) -> Result<BTreeMap<String, T>> {
    let state = simulate::<T>(circuit)?;
    Ok(marginal_distribution(&state, &measured_qubits(circuit)))
}

pub(crate) fn marginal_distribution<T: Scalar>(
    state: &StateVector<T>,
    measured: &[usize],
) -> BTreeMap<String, T> {
    let cutoff = T::epsilon() * T::epsilon();
    let mut dist = BTreeMap::new();
    for (i, amp) in state.amplitudes().iter().enumerate() {
        let p = amp.norm_sqr();
        if p > cutoff {
            *dist.entry(outcome_key(i, measured)).or_insert_with(T::zero) += p;
        }
    }
    dist
}

/// `sum_b parity(b) P(b)` over the exact distribution.
pub fn expectation_exact<T: Scalar>(circuit: &Circuit) -> Result<T> {
    let dist = exact_distribution::<T>(circuit)?;
    Ok(dist
        .iter()
        .map(|(k, p)| {
            if k.bytes().filter(|b| *b == b'1').count() % 2 == 0 {
                *p
            } else {
                -*p
            }
        })
        .sum())
}

/// Upper bound on the number of distinct histogram entries a run can
/// produce: `min(2^m, shots)` for `m` measurements.
pub fn estimate_output_size(circuit: &Circuit, shots: u64) -> u64 {
    let m = circuit.num_measurements();
    let states = if m >= 64 { u64::MAX } else { 1u64 << m };
    states.min(shots)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::circuit::{ghz_circuit, PauliBasis, PrepState};

    const TOL: f64 = 1e-12;

    #[test]
    fn bell_amplitudes() {
        let s = simulate::<f64>(&ghz_circuit(2).unwrap()).unwrap();
        let r = std::f64::consts::FRAC_1_SQRT_2;
        let expect = [r, 0.0, 0.0, r];
        for (a, e) in s.amplitudes().iter().zip(expect) {
            assert!((a.re - e).abs() < TOL && a.im.abs() < TOL);
        }
    }

    #[test]
    fn x_flips() {
        let mut c = Circuit::new("x", 1);
        c.gate(Gate::X(0));
        let s = simulate::<f64>(&c).unwrap();
        assert_eq!(s.amplitudes()[0], Complex::new(0.0, 0.0));
        assert_eq!(s.amplitudes()[1], Complex::new(1.0, 0.0));
    }

    #[test]
    fn ghz4_support() {
        let s = simulate::<f64>(&ghz_circuit(4).unwrap()).unwrap();
        let nonzero: Vec<_> = s
            .amplitudes()
            .iter()
            .enumerate()
            .filter(|(_, a)| a.norm_sqr() > 0.0)
            .map(|(i, a)| (i, a.norm_sqr()))
            .collect();
        assert_eq!(nonzero.len(), 2);
        assert_eq!(nonzero[0].0, 0);
        assert_eq!(nonzero[1].0, 15);
        assert!(nonzero.iter().all(|(_, p)| (p - 0.5).abs() < TOL));
    }

    #[test]
    fn f32_instantiation() {
        let s = simulate::<f32>(&ghz_circuit(3).unwrap()).unwrap();
        assert!((s.norm_sqr() - 1.0).abs() < 1e-6);
        let e = expectation_exact::<f32>(&ghz_circuit(4).unwrap()).unwrap();
        assert!((e - 1.0).abs() < 1e-6);
    }

    #[test]
    fn distributions() {
        let d = exact_distribution::<f64>(&ghz_circuit(4).unwrap()).unwrap();
        assert_eq!(d.len(), 2);
        assert!((d["0000"] - 0.5).abs() < TOL && (d["1111"] - 0.5).abs() < TOL);

        let mut plus = Circuit::new("plus", 1);
        plus.gate(Gate::H(0)).measure(0, PauliBasis::X, "o");
        let d = exact_distribution::<f64>(&plus).unwrap();
        assert_eq!(d.keys().collect::<Vec<_>>(), ["0"]);
        assert!((d["0"] - 1.0).abs() < TOL);
    }

    #[test]
    fn measurement_order_defines_bits() {
        let mut c = Circuit::new("order", 2);
        c.gate(Gate::X(1))
            .measure(1, PauliBasis::Z, "a")
            .measure(0, PauliBasis::Z, "b");
        let d = exact_distribution::<f64>(&c).unwrap();
        assert_eq!(d.keys().collect::<Vec<_>>(), ["10"]);
    }

    #[test]
    fn ghz_expectations() {
        let e4 = expectation_exact::<f64>(&ghz_circuit(4).unwrap()).unwrap();
        let e3 = expectation_exact::<f64>(&ghz_circuit(3).unwrap()).unwrap();
        let e20 = expectation_exact::<f64>(&ghz_circuit(20).unwrap()).unwrap();
        assert!((e4 - 1.0).abs() < 1e-12);
        assert!(e3.abs() < 1e-12);
        assert!((e20 - 1.0).abs() < 1e-9);
    }

    #[test]
    fn prepared_states_have_expected_bloch_vectors() {
        // <X>, <Y>, <Z> of each preparation.
        let cases = [
            (PrepState::Zero, [0.0, 0.0, 1.0]),
            (PrepState::One, [0.0, 0.0, -1.0]),
            (PrepState::Plus, [1.0, 0.0, 0.0]),
            (PrepState::Minus, [-1.0, 0.0, 0.0]),
            (PrepState::PlusI, [0.0, 1.0, 0.0]),
            (PrepState::MinusI, [0.0, -1.0, 0.0]),
        ];
        for (state, bloch) in cases {
            for (basis, expect) in [PauliBasis::X, PauliBasis::Y, PauliBasis::Z]
                .into_iter()
                .zip(bloch)
            {
                let mut c = Circuit::new("p", 1);
                c.prepare(0, state).measure(0, basis, "m");
                let e = expectation_exact::<f64>(&c).unwrap();
                assert!((e - expect).abs() < 1e-12, "{state:?} {basis:?}: {e}");
            }
        }
    }

    #[test]
    fn rotations_match_closed_form() {
        // <Z> after RY(t) is cos t; <X> after RZ(p) RY(t) is sin t cos p.
        for &(t, p) in &[(0.3, 1.1), (2.0, -0.7), (-1.4, 3.0)] {
            let mut c = Circuit::new("r", 1);
            c.gate(Gate::Ry(0, t)).measure(0, PauliBasis::Z, "m");
            assert!((expectation_exact::<f64>(&c).unwrap() - f64::cos(t)).abs() < 1e-12);

            let mut c = Circuit::new("r", 1);
            c.gate(Gate::Ry(0, t))
                .gate(Gate::Rz(0, p))
                .measure(0, PauliBasis::X, "m");
            let expect = t.sin() * p.cos();
            assert!((expectation_exact::<f64>(&c).unwrap() - expect).abs() < 1e-12);

            let mut c = Circuit::new("r", 1);
            c.gate(Gate::Rx(0, t)).measure(0, PauliBasis::Y, "m");
            assert!((expectation_exact::<f64>(&c).unwrap() + t.sin()).abs() < 1e-12);
        }
    }

    #[test]
    fn norm_preserved_per_gate() {
        let gates = [
            Gate::H(0),
            Gate::Rx(1, 0.4),
            Gate::Cnot {
                control: 0,
                target: 2,
            },
            Gate::Y(2),
            Gate::S(1),
            Gate::Ry(0, -2.2),
            Gate::Sdg(2),
            Gate::Rz(1, 5.0),
            Gate::Z(0),
            Gate::X(1),
        ];
        let mut s = StateVector::<f64>::zero(3).unwrap();
        for g in &gates {
            s.apply(g);
            assert!((s.norm_sqr() - 1.0).abs() < 1e-10);
        }
    }

    #[test]
    fn collapse_renormalizes() {
        let mut s = simulate::<f64>(&ghz_circuit(3).unwrap()).unwrap();
        let p = s.collapse(1, true);
        assert!((p - 0.5).abs() < TOL);
        assert!((s.norm_sqr() - 1.0).abs() < TOL);
        assert!((s.amplitudes()[7].norm_sqr() - 1.0).abs() < TOL);
    }

    #[test]
    fn resource_limit() {
        let c = Circuit::new("big", 31);
        assert!(matches!(simulate::<f64>(&c), Err(Error::ResourceLimit(_))));
    }

    #[test]
    fn output_size_bound() {
        assert_eq!(estimate_output_size(&ghz_circuit(4).unwrap(), 1000), 16);
        assert_eq!(estimate_output_size(&ghz_circuit(20).unwrap(), 100), 100);
        assert_eq!(estimate_output_size(&ghz_circuit(1).unwrap(), 1), 1);
    }
}
