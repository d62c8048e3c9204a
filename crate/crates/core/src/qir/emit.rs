use std::fmt::Write as _;

use super::QirModule;
use crate::circuit::{Circuit, Gate, Instruction};
use crate::error::Result;

pub(crate) const ENTRY_NAME: &str = "main";

/// Emits a base-profile QIR module for `circuit`.
///
/// Preparations and non-Z measurement bases are lowered to gates first, so
/// the module body contains only gate calls, `mz` and output recording.
/// Rotation angles are written as hexadecimal doubles for exact round trips.
pub fn emit_qir(circuit: &Circuit) -> Result<QirModule> {
    circuit.ensure_valid()?;
    let low = circuit.lowered();
    let measurements: Vec<_> = low.measurements().cloned().collect();

    let mut out = String::new();
    let _ = writeln!(out, "; ModuleID = '{}'", sanitize_module_id(&low.name));
    let _ = writeln!(
        out,
        "source_filename = \"{}\"",
        sanitize_module_id(&low.name)
    );
    out.push('\n');
    out.push_str("%Qubit = type opaque\n%Result = type opaque\n\n");

    for (i, m) in measurements.iter().enumerate() {
        let bytes = m.label.as_bytes();
        let _ = writeln!(
            out,
            "@{i} = internal constant [{} x i8] c\"{}\\00\"",
            bytes.len() + 1,
            escape_c_string(bytes)
        );
    }
    if !measurements.is_empty() {
        out.push('\n');
    }

    let _ = writeln!(out, "define void @{ENTRY_NAME}() #0 {{");
    out.push_str("entry:\n");

    let mut used: Vec<&'static str> = Vec::new();
    let mut note = |name: &'static str| {
        if !used.contains(&name) {
            used.push(name);
        }
    };

    let mut result = 0usize;
    for instr in &low.instructions {
        match instr {
            Instruction::Gate(g) => {
                let (callee, args) = gate_call(g);
                note(callee);
                let _ = writeln!(out, "  call void @{callee}({args})");
            }
            Instruction::Measure(m) => {
                note(MZ);
                let _ = writeln!(
                    out,
                    "  call void @{MZ}({}, {}) #1",
                    qubit_operand(m.qubit),
                    result_operand(result)
                );
                result += 1;
            }
        }
    }
    for (i, m) in measurements.iter().enumerate() {
        note(RECORD);
        let n = m.label.len() + 1;
        let _ = writeln!(
            out,
            "  call void @{RECORD}({}, i8* getelementptr inbounds ([{n} x i8], [{n} x i8]* @{i}, i32 0, i32 0))",
            result_operand(i)
        );
    }
    out.push_str("  ret void\n}\n\n");

    for (name, sig) in DECLARATIONS {
        if used.contains(name) {
            let _ = writeln!(out, "declare void @{name}({sig})");
        }
    }
    out.push('\n');

    let _ = writeln!(
        out,
        "attributes #0 = {{ \"entry_point\" \"output_labeling_schema\"=\"labeled\" \"qir_profiles\"=\"base_profile\" \"required_num_qubits\"=\"{}\" \"required_num_results\"=\"{}\" }}",
        low.num_qubits,
        measurements.len()
    );
    out.push_str("attributes #1 = { \"irreversible\" }\n\n");
    out.push_str(concat!(
        "!llvm.module.flags = !{!0, !1, !2, !3}\n\n",
        "!0 = !{i32 1, !\"qir_major_version\", i32 1}\n",
        "!1 = !{i32 7, !\"qir_minor_version\", i32 0}\n",
        "!2 = !{i32 1, !\"dynamic_qubit_management\", i1 false}\n",
        "!3 = !{i32 1, !\"dynamic_result_management\", i1 false}\n",
    ));

    Ok(QirModule {
        text: out,
        entry_name: ENTRY_NAME.to_owned(),
    })
}

const MZ: &str = "__quantum__qis__mz__body";
const RECORD: &str = "__quantum__rt__result_record_output";

const DECLARATIONS: &[(&str, &str)] = &[
    ("__quantum__qis__h__body", "%Qubit*"),
    ("__quantum__qis__x__body", "%Qubit*"),
    ("__quantum__qis__y__body", "%Qubit*"),
    ("__quantum__qis__z__body", "%Qubit*"),
    ("__quantum__qis__s__body", "%Qubit*"),
    ("__quantum__qis__s__adj", "%Qubit*"),
    ("__quantum__qis__rx__body", "double, %Qubit*"),
    ("__quantum__qis__ry__body", "double, %Qubit*"),
    ("__quantum__qis__rz__body", "double, %Qubit*"),
    ("__quantum__qis__cnot__body", "%Qubit*, %Qubit*"),
    ("__quantum__qis__mz__body", "%Qubit*, %Result* writeonly"),
    ("__quantum__rt__result_record_output", "%Result*, i8*"),
];

fn gate_call(g: &Gate) -> (&'static str, String) {
    match *g {
        Gate::H(q) => ("__quantum__qis__h__body", qubit_operand(q)),
        Gate::X(q) => ("__quantum__qis__x__body", qubit_operand(q)),
        Gate::Y(q) => ("__quantum__qis__y__body", qubit_operand(q)),
        Gate::Z(q) => ("__quantum__qis__z__body", qubit_operand(q)),
        Gate::S(q) => ("__quantum__qis__s__body", qubit_operand(q)),
        Gate::Sdg(q) => ("__quantum__qis__s__adj", qubit_operand(q)),
        Gate::Rx(q, a) => ("__quantum__qis__rx__body", rotation_args(a, q)),
        Gate::Ry(q, a) => ("__quantum__qis__ry__body", rotation_args(a, q)),
        Gate::Rz(q, a) => ("__quantum__qis__rz__body", rotation_args(a, q)),
        Gate::Cnot { control, target } => (
            "__quantum__qis__cnot__body",
            format!("{}, {}", qubit_operand(control), qubit_operand(target)),
        ),
    }
}

fn rotation_args(angle: f64, q: usize) -> String {
    format!("double 0x{:016X}, {}", angle.to_bits(), qubit_operand(q))
}

fn qubit_operand(q: usize) -> String {
    if q == 0 {
        "%Qubit* null".to_owned()
    } else {
        format!("%Qubit* inttoptr (i64 {q} to %Qubit*)")
    }
}

fn result_operand(r: usize) -> String {
    if r == 0 {
        "%Result* null".to_owned()
    } else {
        format!("%Result* inttoptr (i64 {r} to %Result*)")
    }
}

fn escape_c_string(bytes: &[u8]) -> String {
    let mut s = String::with_capacity(bytes.len());
    for &b in bytes {
        if b.is_ascii_graphic() && b != b'"' && b != b'\\' || b == b' ' {
            s.push(b as char);
        } else {
            let _ = write!(s, "\\{b:02X}");
        }
    }
    s
}

fn sanitize_module_id(name: &str) -> String {
    name.chars()
        .map(|c| {
            if c == '\'' || c == '"' || c.is_control() {
                '_'
            } else {
                c
            }
        })
        .collect()
}
