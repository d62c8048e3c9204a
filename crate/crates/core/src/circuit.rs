//! Circuit intermediate representation shared by the QIR front end, the
//! backends and the wire cutter.
//!
//! A [`Circuit`] is a list of initial-state [`Preparation`]s followed by an
//! instruction stream of gates and measurements. Measurements are expected
//! to be terminal; [`Circuit::validate`] reports any that are not.
//! Histogram bit `i` always refers to the `i`-th measurement in stream
//! order, never to a qubit index.

use std::collections::HashSet;
use std::fmt::{self, Write as _};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Largest register the desk-scale simulator accepts by default.
pub const DEFAULT_MAX_QUBITS: usize = 30;

pub type QubitIndex = usize;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum PauliBasis {
    X,
    Y,
    Z,
}

impl PauliBasis {
    pub fn as_str(self) -> &'static str {
        match self {
            PauliBasis::X => "x",
            PauliBasis::Y => "y",
            PauliBasis::Z => "z",
        }
    }
}

/// Single-qubit initial states available to a preparation slot.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum PrepState {
    #[default]
    Zero,
    One,
    Plus,
    Minus,
    PlusI,
    MinusI,
}

impl PrepState {
    pub fn as_str(self) -> &'static str {
        match self {
            PrepState::Zero => "zero",
            PrepState::One => "one",
            PrepState::Plus => "plus",
            PrepState::Minus => "minus",
            PrepState::PlusI => "plus_i",
            PrepState::MinusI => "minus_i",
        }
    }

    /// Gates that map |0> to this state.
    pub fn lowering(self, qubit: QubitIndex) -> Vec<Gate> {
        match self {
            PrepState::Zero => vec![],
            PrepState::One => vec![Gate::X(qubit)],
            PrepState::Plus => vec![Gate::H(qubit)],
            PrepState::Minus => vec![Gate::X(qubit), Gate::H(qubit)],
            PrepState::PlusI => vec![Gate::H(qubit), Gate::S(qubit)],
            PrepState::MinusI => vec![Gate::X(qubit), Gate::H(qubit), Gate::S(qubit)],
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum Gate {
    H(QubitIndex),
    X(QubitIndex),
    Y(QubitIndex),
    Z(QubitIndex),
    S(QubitIndex),
    Sdg(QubitIndex),
    Rx(QubitIndex, f64),
    Ry(QubitIndex, f64),
    Rz(QubitIndex, f64),
    Cnot {
        control: QubitIndex,
        target: QubitIndex,
    },
}

impl Gate {
    pub fn name(&self) -> &'static str {
        match self {
            Gate::H(_) => "h",
            Gate::X(_) => "x",
            Gate::Y(_) => "y",
            Gate::Z(_) => "z",
            Gate::S(_) => "s",
            Gate::Sdg(_) => "sdg",
            Gate::Rx(..) => "rx",
            Gate::Ry(..) => "ry",
            Gate::Rz(..) => "rz",
            Gate::Cnot { .. } => "cnot",
        }
    }

    /// Qubits touched, control first for CNOT.
    pub fn qubits(&self) -> Vec<QubitIndex> {
        match *self {
            Gate::H(q) | Gate::X(q) | Gate::Y(q) | Gate::Z(q) | Gate::S(q) | Gate::Sdg(q) => {
                vec![q]
            }
            Gate::Rx(q, _) | Gate::Ry(q, _) | Gate::Rz(q, _) => vec![q],
            Gate::Cnot { control, target } => vec![control, target],
        }
    }

    pub fn angle(&self) -> Option<f64> {
        match *self {
            Gate::Rx(_, a) | Gate::Ry(_, a) | Gate::Rz(_, a) => Some(a),
            _ => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Measurement {
    pub qubit: QubitIndex,
    pub basis: PauliBasis,
    pub label: String,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Preparation {
    pub qubit: QubitIndex,
    pub state: PrepState,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum Instruction {
    Gate(Gate),
    Measure(Measurement),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Circuit {
    pub name: String,
    pub num_qubits: usize,
    pub preparations: Vec<Preparation>,
    pub instructions: Vec<Instruction>,
}

impl Circuit {
    pub fn new(name: impl Into<String>, num_qubits: usize) -> Self {
        Circuit {
            name: name.into(),
            num_qubits,
            preparations: Vec::new(),
            instructions: Vec::new(),
        }
    }

    pub fn prepare(&mut self, qubit: QubitIndex, state: PrepState) -> &mut Self {
        self.preparations.push(Preparation { qubit, state });
        self
    }

    pub fn gate(&mut self, gate: Gate) -> &mut Self {
        self.instructions.push(Instruction::Gate(gate));
        self
    }

    pub fn measure(
        &mut self,
        qubit: QubitIndex,
        basis: PauliBasis,
        label: impl Into<String>,
    ) -> &mut Self {
        self.instructions.push(Instruction::Measure(Measurement {
            qubit,
            basis,
            label: label.into(),
        }));
        self
    }

    pub fn gates(&self) -> impl Iterator<Item = &Gate> {
        self.instructions.iter().filter_map(|i| match i {
            Instruction::Gate(g) => Some(g),
            Instruction::Measure(_) => None,
        })
    }

    pub fn measurements(&self) -> impl Iterator<Item = &Measurement> {
        self.instructions.iter().filter_map(|i| match i {
            Instruction::Measure(m) => Some(m),
            Instruction::Gate(_) => None,
        })
    }

    pub fn num_measurements(&self) -> usize {
        self.measurements().count()
    }

    pub fn preparation_of(&self, qubit: QubitIndex) -> PrepState {
        self.preparations
            .iter()
            .find(|p| p.qubit == qubit)
            .map(|p| p.state)
            .unwrap_or_default()
    }

    /// Checks every structural invariant against the default qubit bound.
    pub fn validate(&self) -> ValidationReport {
        self.validate_with_limit(DEFAULT_MAX_QUBITS)
    }

    pub fn validate_with_limit(&self, max_qubits: usize) -> ValidationReport {
        let mut violations = Vec::new();
        let n = self.num_qubits;
        let mut push = |location, message: String| violations.push(Violation { location, message });

        if n == 0 {
            push(Location::Circuit, "circuit has no qubits".into());
        }
        if n > max_qubits {
            push(
                Location::Circuit,
                format!("{n} qubits exceeds the {max_qubits}-qubit bound"),
            );
        }

        let mut prepared = HashSet::new();
        for (i, p) in self.preparations.iter().enumerate() {
            if p.qubit >= n {
                push(
                    Location::Preparation(i),
                    format!("qubit {} out of range for {n} qubits", p.qubit),
                );
            }
            if !prepared.insert(p.qubit) {
                push(
                    Location::Preparation(i),
                    format!("qubit {} prepared more than once", p.qubit),
                );
            }
        }

        // measured qubit -> measurement index
        let mut measured: Vec<Option<usize>> = vec![None; n];
        let (mut gate_idx, mut meas_idx) = (0usize, 0usize);
        for instr in &self.instructions {
            match instr {
                Instruction::Gate(g) => {
                    let loc = Location::Gate(gate_idx);
                    let qubits = g.qubits();
                    for &q in &qubits {
                        if q >= n {
                            push(loc, format!("qubit {q} out of range for {n} qubits"));
                        } else if let Some(m) = measured[q] {
                            push(
                                loc,
                                format!(
                                    "non-terminal measurement: qubit {q} measured by measurement {m} is used afterwards"
                                ),
                            );
                        }
                    }
                    if let Gate::Cnot { control, target } = g {
                        if control == target {
                            push(loc, format!("control equals target at gate {gate_idx}"));
                        }
                    }
                    if let Some(a) = g.angle() {
                        if !a.is_finite() {
                            push(loc, format!("non-finite angle {a}"));
                        }
                    }
                    gate_idx += 1;
                }
                Instruction::Measure(m) => {
                    let loc = Location::Measurement(meas_idx);
                    if m.qubit >= n {
                        push(
                            loc,
                            format!("qubit {} out of range for {n} qubits", m.qubit),
                        );
                    } else if let Some(prev) = measured[m.qubit] {
                        push(
                            loc,
                            format!("qubit {} already measured by measurement {prev}", m.qubit),
                        );
                    } else {
                        measured[m.qubit] = Some(meas_idx);
                    }
                    meas_idx += 1;
                }
            }
        }

        ValidationReport { violations }
    }

    pub fn ensure_valid(&self) -> Result<()> {
        self.validate().into_result()
    }

    /// Returns the equivalent circuit with preparations turned into leading
    /// gates and every measurement rotated into the Z basis.
    pub fn lowered(&self) -> Circuit {
        let mut out = Circuit::new(self.name.clone(), self.num_qubits);
        for p in &self.preparations {
            for g in p.state.lowering(p.qubit) {
                out.gate(g);
            }
        }
        for instr in &self.instructions {
            match instr {
                Instruction::Gate(g) => {
                    out.gate(*g);
                }
                Instruction::Measure(m) => {
                    match m.basis {
                        PauliBasis::Z => {}
                        PauliBasis::X => {
                            out.gate(Gate::H(m.qubit));
                        }
                        PauliBasis::Y => {
                            out.gate(Gate::Sdg(m.qubit));
                            out.gate(Gate::H(m.qubit));
                        }
                    }
                    out.measure(m.qubit, PauliBasis::Z, m.label.clone());
                }
            }
        }
        out
    }

    /// Deterministic text form: a header line, then one line per
    /// preparation, gate and measurement.
    pub fn canonical_text(&self) -> String {
        let mut s = format!("circuit {} {}\n", self.name, self.num_qubits);
        s.push_str(&self.body_text());
        s
    }

    /// Canonical text without the name header, i.e. the structural identity
    /// of the circuit.
    pub fn body_text(&self) -> String {
        let mut s = String::new();
        for p in &self.preparations {
            let _ = writeln!(s, "prep {} {}", p.qubit, p.state.as_str());
        }
        for instr in &self.instructions {
            match instr {
                Instruction::Gate(g) => {
                    s.push_str(g.name());
                    for q in g.qubits() {
                        let _ = write!(s, " {q}");
                    }
                    if let Some(a) = g.angle() {
                        let _ = write!(s, " {a:?}");
                    }
                    s.push('\n');
                }
                Instruction::Measure(m) => {
                    let _ = writeln!(s, "measure {} {} {}", m.qubit, m.basis.as_str(), m.label);
                }
            }
        }
        s
    }
}

impl fmt::Display for Circuit {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.canonical_text())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Location {
    Circuit,
    Preparation(usize),
    Gate(usize),
    Measurement(usize),
}

impl fmt::Display for Location {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Location::Circuit => write!(f, "circuit"),
            Location::Preparation(i) => write!(f, "preparation {i}"),
            Location::Gate(i) => write!(f, "gate {i}"),
            Location::Measurement(i) => write!(f, "measurement {i}"),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Violation {
    pub location: Location,
    pub message: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.location, self.message)
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_ok(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn into_result(self) -> Result<()> {
        if self.is_ok() {
            Ok(())
        } else {
            let msgs: Vec<_> = self.violations.iter().map(ToString::to_string).collect();
            Err(Error::InvalidArgument(msgs.join("; ")))
        }
    }
}

/// H on qubit 0 followed by the CNOT chain `i -> i+1`, Z-measuring every
/// qubit with labels `y1..yn`.
pub fn ghz_circuit(n: usize) -> Result<Circuit> {
    if n == 0 {
        return Err(Error::invalid("a GHZ circuit needs at least one qubit"));
    }
    if n > DEFAULT_MAX_QUBITS {
        return Err(Error::ResourceLimit(format!(
            "{n} qubits exceeds the {DEFAULT_MAX_QUBITS}-qubit simulator bound"
        )));
    }
    let mut c = Circuit::new(format!("ghz{n}"), n);
    c.gate(Gate::H(0));
    for i in 0..n - 1 {
        c.gate(Gate::Cnot {
            control: i,
            target: i + 1,
        });
    }
    for i in 0..n {
        c.measure(i, PauliBasis::Z, format!("y{}", i + 1));
    }
    Ok(c)
}

/// `(-1)^(number of ones)` of a non-empty binary string.
pub fn parity(bits: &str) -> Result<i8> {
    if bits.is_empty() {
        return Err(Error::invalid("parity of an empty bitstring"));
    }
    let mut sign = 1i8;
    for ch in bits.chars() {
        match ch {
            '0' => {}
            '1' => sign = -sign,
            other => {
                return Err(Error::invalid(format!(
                    "non-binary character {other:?} in bitstring"
                )))
            }
        }
    }
    Ok(sign)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn ghz_shapes() {
        let c = ghz_circuit(1).unwrap();
        assert_eq!(c.gates().count(), 1);
        assert_eq!(c.num_measurements(), 1);

        let c = ghz_circuit(4).unwrap();
        let gates: Vec<_> = c.gates().copied().collect();
        assert_eq!(gates[0], Gate::H(0));
        assert_eq!(gates.len(), 4);
        assert!(gates[1..].iter().all(|g| matches!(g, Gate::Cnot { .. })));
        assert_eq!(c.num_measurements(), 4);
        assert!(c.measurements().all(|m| m.basis == PauliBasis::Z));
        let labels: Vec<_> = c.measurements().map(|m| m.label.as_str()).collect();
        assert_eq!(labels, ["y1", "y2", "y3", "y4"]);

        let c = ghz_circuit(20).unwrap();
        assert_eq!(c.gates().count(), 20);
        assert_eq!(c.num_measurements(), 20);
    }

    #[test]
    fn ghz_rejects_out_of_range() {
        assert!(matches!(ghz_circuit(0), Err(Error::InvalidArgument(_))));
        assert!(matches!(ghz_circuit(31), Err(Error::ResourceLimit(m)) if m.contains("30-qubit")));
    }

    #[test]
    fn parity_examples() {
        assert_eq!(parity("0000").unwrap(), 1);
        assert_eq!(parity("1000").unwrap(), -1);
        assert_eq!(parity("1111").unwrap(), 1);
        assert!(parity("").is_err());
        assert!(parity("10a1").is_err());
    }

    #[test]
    fn self_loop_cnot_is_reported() {
        let mut c = Circuit::new("bad", 3);
        c.gate(Gate::Cnot {
            control: 2,
            target: 2,
        });
        let report = c.validate();
        assert_eq!(report.violations.len(), 1);
        assert_eq!(report.violations[0].location, Location::Gate(0));
        assert!(report.violations[0]
            .message
            .contains("control equals target at gate 0"));
    }

    #[test]
    fn gate_after_measurement_is_reported() {
        let mut c = Circuit::new("bad", 2);
        c.gate(Gate::H(0))
            .measure(0, PauliBasis::Z, "m0")
            .gate(Gate::X(0));
        let report = c.validate();
        assert!(!report.is_ok());
        assert!(report.violations[0]
            .message
            .contains("non-terminal measurement"));
        assert_eq!(report.violations[0].location, Location::Gate(1));
    }

    #[test]
    fn other_violations() {
        let mut c = Circuit::new("bad", 2);
        c.prepare(0, PrepState::Plus)
            .prepare(0, PrepState::One)
            .prepare(5, PrepState::One)
            .gate(Gate::Rz(1, f64::NAN))
            .gate(Gate::H(4))
            .measure(1, PauliBasis::X, "a")
            .measure(1, PauliBasis::Z, "b");
        let report = c.validate();
        let locs: Vec<_> = report.violations.iter().map(|v| v.location).collect();
        assert_eq!(
            locs,
            [
                Location::Preparation(1),
                Location::Preparation(2),
                Location::Gate(0),
                Location::Gate(1),
                Location::Measurement(1),
            ]
        );
        assert!(c.ensure_valid().is_err());

        let big = Circuit::new("big", 31);
        assert!(!big.validate().is_ok());
        assert!(big.validate_with_limit(32).is_ok());
    }

    #[test]
    fn lowering_rules() {
        let mut c = Circuit::new("l", 2);
        c.prepare(0, PrepState::MinusI)
            .prepare(1, PrepState::Plus)
            .measure(0, PauliBasis::Y, "a")
            .measure(1, PauliBasis::X, "b");
        let low = c.lowered();
        assert!(low.preparations.is_empty());
        let gates: Vec<_> = low.gates().copied().collect();
        assert_eq!(
            gates,
            [
                Gate::X(0),
                Gate::H(0),
                Gate::S(0),
                Gate::H(1),
                Gate::Sdg(0),
                Gate::H(0),
                Gate::H(1)
            ]
        );
        assert!(low.measurements().all(|m| m.basis == PauliBasis::Z));
        assert!(low.validate().is_ok());
    }

    #[test]
    fn canonical_text_is_line_per_item() {
        let mut c = Circuit::new("t", 2);
        c.prepare(1, PrepState::Plus)
            .gate(Gate::Rz(0, 0.5))
            .gate(Gate::Cnot {
                control: 0,
                target: 1,
            })
            .measure(1, PauliBasis::X, "o_k");
        assert_eq!(
            c.canonical_text(),
            "circuit t 2\nprep 1 plus\nrz 0 0.5\ncnot 0 1\nmeasure 1 x o_k\n"
        );
    }

    proptest! {
        #[test]
        fn parity_is_multiplicative(a in "[01]{1,24}", b in "[01]{1,24}") {
            let joined = format!("{a}{b}");
            prop_assert_eq!(parity(&joined).unwrap(), parity(&a).unwrap() * parity(&b).unwrap());
        }

        #[test]
        fn ghz_always_valid(n in 1usize..=30) {
            prop_assert!(ghz_circuit(n).unwrap().validate().is_ok());
        }
    }
}
