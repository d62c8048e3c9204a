use std::collections::HashMap;

use super::Diagnostic;
use crate::circuit::{Circuit, Gate, Location, PauliBasis};
use crate::error::{Error, Result};

/// Outcome of a successful parse.
#[derive(Clone, Debug, PartialEq)]
pub struct ParsedModule {
    pub circuit: Circuit,
    pub entry_name: String,
    pub warnings: Vec<Diagnostic>,
}

/// Parses a QIR text module into a [`Circuit`] with Z-basis measurements in
/// `mz` call order.
pub fn parse_qir(text: &str) -> Result<Circuit> {
    parse_module(text).map(|p| p.circuit)
}

pub fn parse_module(text: &str) -> Result<ParsedModule> {
    let outline = scan_module(text)?;
    let entry = select_entry(&outline)?;
    let mut body = BodyParser::new(&outline);
    body.run(text, entry);
    body.finish(entry)
}

struct FunctionHeader {
    name: String,
    line: usize,
    attr_groups: Vec<String>,
    inline_entry: bool,
    /// 1-based line numbers of the first and last body line (exclusive of
    /// the `define` and closing brace lines).
    body: (usize, usize),
}

#[derive(Default)]
struct ModuleOutline {
    module_id: Option<String>,
    functions: Vec<FunctionHeader>,
    attributes: HashMap<String, String>,
    strings: HashMap<String, String>,
}

/// Drops a trailing `; comment`, ignoring semicolons inside quotes.
fn strip_comment(line: &str) -> &str {
    let mut in_quote = false;
    for (i, ch) in line.char_indices() {
        match ch {
            '"' => in_quote = !in_quote,
            ';' if !in_quote => return &line[..i],
            _ => {}
        }
    }
    line
}

fn scan_module(text: &str) -> Result<ModuleOutline> {
    let mut outline = ModuleOutline::default();
    let mut errors = Vec::new();
    let mut open: Option<FunctionHeader> = None;

    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let trimmed = raw.trim();
        if let Some(rest) = trimmed.strip_prefix("; ModuleID =") {
            let id = rest.trim().trim_matches('\'').to_owned();
            outline.module_id = Some(id);
            continue;
        }
        let code = strip_comment(raw).trim();
        if code.is_empty() {
            continue;
        }

        if let Some(func) = open.as_mut() {
            if code == "}" {
                func.body.1 = line_no - 1;
                outline.functions.push(open.take().expect("open function"));
            }
            continue;
        }

        if code.starts_with("define ") {
            match parse_define(code, line_no) {
                Ok(header) => open = Some(header),
                Err(d) => errors.push(d),
            }
        } else if let Some(rest) = code.strip_prefix("attributes ") {
            if let Some((id, body)) = rest.split_once('=') {
                outline
                    .attributes
                    .insert(id.trim().to_owned(), body.trim().to_owned());
            }
        } else if code.starts_with('@') {
            if let Some((name, value)) = parse_string_global(code) {
                outline.strings.insert(name, value);
            }
        }
    }
    if let Some(func) = open {
        errors.push(Diagnostic::error(
            func.line,
            format!("function @{} is missing its closing brace", func.name),
        ));
    }
    if errors.is_empty() {
        Ok(outline)
    } else {
        Err(Error::Parse(errors))
    }
}

fn parse_define(code: &str, line_no: usize) -> std::result::Result<FunctionHeader, Diagnostic> {
    let at = code.find('@').ok_or_else(|| {
        Diagnostic::error(line_no, "syntax error: define without a function name")
    })?;
    let (name, rest) = take_global_name(&code[at + 1..]);
    if name.is_empty() {
        return Err(Diagnostic::error(
            line_no,
            "syntax error: empty function name",
        ));
    }
    if !code.ends_with('{') {
        return Err(Diagnostic::error(
            line_no,
            "syntax error: expected '{' at the end of the define line",
        ));
    }
    let after_params = rest.rfind(')').map(|i| &rest[i + 1..]).unwrap_or(rest);
    let attr_groups = after_params
        .split_whitespace()
        .filter(|t| t.starts_with('#'))
        .map(str::to_owned)
        .collect();
    Ok(FunctionHeader {
        name,
        line: line_no,
        attr_groups,
        inline_entry: code.contains("\"entry_point\""),
        body: (line_no + 1, line_no),
    })
}

/// Splits `name(...)`/`"quoted name"(...)` after an `@`.
fn take_global_name(s: &str) -> (String, &str) {
    if let Some(rest) = s.strip_prefix('"') {
        if let Some(end) = rest.find('"') {
            return (rest[..end].to_owned(), &rest[end + 1..]);
        }
    }
    let end = s
        .find(|c: char| !(c.is_ascii_alphanumeric() || matches!(c, '_' | '.' | '$' | '-')))
        .unwrap_or(s.len());
    (s[..end].to_owned(), &s[end..])
}

/// Recognizes `@name = ... c"bytes\00"` and returns the decoded string
/// without its terminating NUL.
fn parse_string_global(code: &str) -> Option<(String, String)> {
    let (name, rest) = take_global_name(&code[1..]);
    let rest = rest.trim_start().strip_prefix('=')?;
    let start = rest.find("c\"")? + 2;
    let end = start + rest[start..].rfind('"')?;
    let bytes = decode_c_string(&rest[start..end])?;
    let bytes = bytes.strip_suffix(&[0]).unwrap_or(&bytes).to_vec();
    Some((name, String::from_utf8(bytes).ok()?))
}

fn decode_c_string(s: &str) -> Option<Vec<u8>> {
    let raw = s.as_bytes();
    let mut out = Vec::with_capacity(raw.len());
    let mut i = 0;
    while i < raw.len() {
        if raw[i] == b'\\' {
            let hex = s.get(i + 1..i + 3)?;
            out.push(u8::from_str_radix(hex, 16).ok()?);
            i += 3;
        } else {
            out.push(raw[i]);
            i += 1;
        }
    }
    Some(out)
}

fn select_entry(outline: &ModuleOutline) -> Result<&FunctionHeader> {
    let is_entry = |f: &FunctionHeader| {
        f.inline_entry
            || f.attr_groups.iter().any(|g| {
                outline
                    .attributes
                    .get(g)
                    .is_some_and(|a| a.contains("\"entry_point\""))
            })
    };
    let entries: Vec<_> = outline.functions.iter().filter(|f| is_entry(f)).collect();
    match (entries.as_slice(), outline.functions.as_slice()) {
        ([only], _) => Ok(only),
        ([], [only]) => Ok(only),
        ([], []) => Err(Error::Parse(vec![Diagnostic::error(
            1,
            "no entry point: module defines no functions",
        )])),
        ([], many) => Err(Error::Parse(vec![Diagnostic::error(
            many[0].line,
            "no entry point: several functions defined and none has the \"entry_point\" attribute",
        )])),
        (several, _) => Err(Error::Parse(
            several
                .iter()
                .map(|f| Diagnostic::error(f.line, format!("multiple entry points (@{})", f.name)))
                .collect(),
        )),
    }
}

fn required_attr(outline: &ModuleOutline, entry: &FunctionHeader, key: &str) -> Option<usize> {
    let needle = format!("\"{key}\"=\"");
    entry.attr_groups.iter().find_map(|g| {
        let attrs = outline.attributes.get(g)?;
        let start = attrs.find(&needle)? + needle.len();
        let end = start + attrs[start..].find('"')?;
        attrs[start..end].parse().ok()
    })
}

const CONTROL_FLOW: &[&str] = &[
    "br",
    "switch",
    "indirectbr",
    "phi",
    "callbr",
    "invoke",
    "select",
];

struct BodyParser<'a> {
    outline: &'a ModuleOutline,
    circuit: Circuit,
    errors: Vec<Diagnostic>,
    warnings: Vec<Diagnostic>,
    gate_lines: Vec<usize>,
    measure_lines: Vec<usize>,
    /// Result index of each measurement, in call order.
    measure_results: Vec<usize>,
    labels: HashMap<usize, String>,
    max_qubit: Option<usize>,
    seen_label: bool,
    seen_instruction: bool,
    returned: bool,
    line_no: usize,
    pending_warning: Option<String>,
}

impl<'a> BodyParser<'a> {
    fn new(outline: &'a ModuleOutline) -> Self {
        let name = outline
            .module_id
            .clone()
            .unwrap_or_else(|| "qir".to_owned());
        BodyParser {
            outline,
            circuit: Circuit::new(name, 0),
            errors: Vec::new(),
            warnings: Vec::new(),
            gate_lines: Vec::new(),
            measure_lines: Vec::new(),
            measure_results: Vec::new(),
            labels: HashMap::new(),
            max_qubit: None,
            seen_label: false,
            seen_instruction: false,
            returned: false,
            line_no: 0,
            pending_warning: None,
        }
    }

    fn run(&mut self, text: &str, entry: &FunctionHeader) {
        let (first, last) = entry.body;
        for (idx, raw) in text.lines().enumerate() {
            let line_no = idx + 1;
            if line_no < first || line_no > last {
                continue;
            }
            let code = strip_comment(raw).trim();
            if code.is_empty() {
                continue;
            }
            self.line_no = line_no;
            if let Err(msg) = self.line(code) {
                self.errors.push(Diagnostic::error(line_no, msg));
            } else if let Some(w) = self.pending_warning.take() {
                self.warnings.push(Diagnostic::warning(line_no, w));
            }
        }
    }

    fn line(&mut self, code: &str) -> std::result::Result<(), String> {
        if code.ends_with(':') && !code.contains(' ') {
            if self.seen_label || self.seen_instruction {
                return Err(format!(
                    "unsupported control flow: additional basic block '{code}'"
                ));
            }
            self.seen_label = true;
            return Ok(());
        }
        if self.returned {
            return Err("syntax error: instruction after 'ret'".to_owned());
        }
        self.seen_instruction = true;

        let (assigned, instr) = match code.split_once('=') {
            Some((lhs, rhs)) if lhs.trim().starts_with('%') && !lhs.contains('(') => {
                (true, rhs.trim())
            }
            _ => (false, code),
        };
        let mut opcode = instr.split_whitespace().next().unwrap_or_default();
        let mut rest = instr;
        for prefix in ["tail", "musttail", "notail"] {
            if opcode == prefix {
                rest = rest[prefix.len()..].trim_start();
                opcode = rest.split_whitespace().next().unwrap_or_default();
            }
        }
        if CONTROL_FLOW.contains(&opcode) {
            return Err(format!("unsupported control flow: '{opcode}'"));
        }
        if opcode == "ret" {
            if rest != "ret void" {
                return Err(format!("syntax error: expected 'ret void', found '{rest}'"));
            }
            self.returned = true;
            return Ok(());
        }
        if opcode != "call" || assigned {
            return Err(format!("unsupported instruction '{opcode}'"));
        }
        self.call(&rest["call".len()..])
    }

    fn call(&mut self, rest: &str) -> std::result::Result<(), String> {
        let at = rest
            .find('@')
            .ok_or_else(|| "syntax error: call without a callee".to_owned())?;
        if rest[..at].split_whitespace().next() != Some("void") {
            return Err("syntax error: only void calls are supported".to_owned());
        }
        let (callee, after) = take_global_name(&rest[at + 1..]);
        let args = call_arguments(after)?;

        let expect = |n: usize| -> std::result::Result<(), String> {
            if args.len() == n {
                Ok(())
            } else {
                Err(format!(
                    "syntax error: @{callee} expects {n} argument(s), found {}",
                    args.len()
                ))
            }
        };

        let single = |ctor: fn(usize) -> Gate, s: &mut Self| -> std::result::Result<(), String> {
            expect(1)?;
            let q = s.qubit(args[0])?;
            s.push_gate(ctor(q));
            Ok(())
        };
        let rotation =
            |ctor: fn(usize, f64) -> Gate, s: &mut Self| -> std::result::Result<(), String> {
                expect(2)?;
                let angle = parse_double(args[0])?;
                let q = s.qubit(args[1])?;
                s.push_gate(ctor(q, angle));
                Ok(())
            };

        match callee.as_str() {
            "__quantum__qis__h__body" => single(Gate::H, self),
            "__quantum__qis__x__body" => single(Gate::X, self),
            "__quantum__qis__y__body" => single(Gate::Y, self),
            "__quantum__qis__z__body" => single(Gate::Z, self),
            "__quantum__qis__s__body" => single(Gate::S, self),
            "__quantum__qis__s__adj" => single(Gate::Sdg, self),
            "__quantum__qis__rx__body" => rotation(Gate::Rx, self),
            "__quantum__qis__ry__body" => rotation(Gate::Ry, self),
            "__quantum__qis__rz__body" => rotation(Gate::Rz, self),
            "__quantum__qis__cnot__body" | "__quantum__qis__cx__body" => {
                expect(2)?;
                let control = self.qubit(args[0])?;
                let target = self.qubit(args[1])?;
                self.push_gate(Gate::Cnot { control, target });
                Ok(())
            }
            "__quantum__qis__mz__body" => {
                expect(2)?;
                let q = self.qubit(args[0])?;
                let r = parse_index_operand(args[1], "%Result*")?;
                if self.measure_results.contains(&r) {
                    return Err(format!("result {r} is written by more than one mz"));
                }
                self.measure_results.push(r);
                self.measure_lines.push(self.line_no);
                self.circuit.measure(q, PauliBasis::Z, String::new());
                Ok(())
            }
            "__quantum__rt__result_record_output" => {
                expect(2)?;
                let r = parse_index_operand(args[0], "%Result*")?;
                if !self.measure_results.contains(&r) {
                    self.pending_warning =
                        Some(format!("result {r} is recorded but never measured"));
                }
                if let Some(label) = self.label(args[1])? {
                    self.labels.insert(r, label);
                }
                Ok(())
            }
            "__quantum__rt__initialize" => expect(1),
            "__quantum__rt__array_record_output" | "__quantum__rt__tuple_record_output" => {
                expect(2)
            }
            other if other.starts_with("__quantum__") => {
                Err(format!("unsupported intrinsic @{other}"))
            }
            other => Err(format!("unsupported call to @{other}")),
        }
    }

    fn qubit(&mut self, arg: &str) -> std::result::Result<usize, String> {
        let q = parse_index_operand(arg, "%Qubit*")?;
        self.max_qubit = Some(self.max_qubit.map_or(q, |m| m.max(q)));
        Ok(q)
    }

    fn push_gate(&mut self, g: Gate) {
        self.gate_lines.push(self.line_no);
        self.circuit.gate(g);
    }

    fn label(&self, arg: &str) -> std::result::Result<Option<String>, String> {
        let arg = arg.trim();
        if arg.ends_with("null") {
            return Ok(None);
        }
        let at = arg
            .find('@')
            .ok_or_else(|| format!("syntax error: malformed label operand '{arg}'"))?;
        let (name, _) = take_global_name(&arg[at + 1..]);
        self.outline
            .strings
            .get(&name)
            .cloned()
            .map(Some)
            .ok_or_else(|| format!("syntax error: unknown string constant @{name}"))
    }

    fn finish(mut self, entry: &FunctionHeader) -> Result<ParsedModule> {
        if !self.returned && self.errors.is_empty() {
            self.errors.push(Diagnostic::error(
                entry.body.1 + 1,
                format!("syntax error: @{} does not end with 'ret void'", entry.name),
            ));
        }
        let declared = required_attr(self.outline, entry, "required_num_qubits").unwrap_or(0);
        let used = self.max_qubit.map_or(0, |m| m + 1);
        self.circuit.num_qubits = declared.max(used);
        if self.circuit.num_qubits == 0 && self.errors.is_empty() {
            self.errors
                .push(Diagnostic::error(entry.line, "entry point uses no qubits"));
        }

        let labels = std::mem::take(&mut self.labels);
        let mut idx = 0;
        for instr in &mut self.circuit.instructions {
            if let crate::circuit::Instruction::Measure(m) = instr {
                let r = self.measure_results[idx];
                m.label = labels.get(&r).cloned().unwrap_or_else(|| format!("r{r}"));
                idx += 1;
            }
        }

        if self.errors.is_empty() {
            for v in self.circuit.validate_with_limit(usize::MAX).violations {
                let line = match v.location {
                    Location::Gate(i) => self.gate_lines[i],
                    Location::Measurement(i) => self.measure_lines[i],
                    Location::Preparation(_) | Location::Circuit => entry.line,
                };
                self.errors.push(Diagnostic::error(line, v.message));
            }
        }

        if self.errors.is_empty() {
            Ok(ParsedModule {
                circuit: self.circuit,
                entry_name: entry.name.clone(),
                warnings: self.warnings,
            })
        } else {
            Err(Error::Parse(self.errors))
        }
    }
}

fn call_arguments(after_name: &str) -> std::result::Result<Vec<&str>, String> {
    let open = after_name
        .find('(')
        .ok_or_else(|| "syntax error: expected '(' after callee".to_owned())?;
    if !after_name[..open].trim().is_empty() {
        return Err("syntax error: unexpected text between callee and '('".to_owned());
    }
    let inner_start = open + 1;
    let mut depth = 1usize;
    let mut args = Vec::new();
    let mut arg_start = inner_start;
    for (i, ch) in after_name[inner_start..].char_indices() {
        let pos = inner_start + i;
        match ch {
            '(' | '[' => depth += 1,
            ')' | ']' => {
                depth -= 1;
                if depth == 0 {
                    let last = after_name[arg_start..pos].trim();
                    if !last.is_empty() {
                        args.push(last);
                    } else if !args.is_empty() {
                        return Err("syntax error: empty argument".to_owned());
                    }
                    return Ok(args);
                }
            }
            ',' if depth == 1 => {
                let arg = after_name[arg_start..pos].trim();
                if arg.is_empty() {
                    return Err("syntax error: empty argument".to_owned());
                }
                args.push(arg);
                arg_start = pos + 1;
            }
            _ => {}
        }
    }
    Err("syntax error: unbalanced parentheses in call".to_owned())
}

/// `%Qubit* null`, `%Qubit* inttoptr (i64 K to %Qubit*)`, or the opaque
/// pointer spellings `ptr null` / `ptr inttoptr (i64 K to ptr)`.
fn parse_index_operand(arg: &str, ty: &str) -> std::result::Result<usize, String> {
    let arg = arg.trim();
    let value = arg
        .strip_prefix(ty)
        .or_else(|| arg.strip_prefix("ptr "))
        .ok_or_else(|| format!("syntax error: expected {ty} operand, found '{arg}'"))?
        .trim();
    if value == "null" {
        return Ok(0);
    }
    let malformed = || format!("syntax error: malformed {ty} operand '{arg}'");
    let inner = value
        .strip_prefix("inttoptr")
        .map(str::trim)
        .and_then(|v| v.strip_prefix('('))
        .and_then(|v| v.strip_suffix(')'))
        .ok_or_else(malformed)?;
    let tokens: Vec<_> = inner.split_whitespace().collect();
    match tokens.as_slice() {
        ["i64", index, "to", target] if *target == ty || *target == "ptr" => {
            let index: u32 = index.parse().map_err(|_| malformed())?;
            Ok(index as usize)
        }
        _ => Err(malformed()),
    }
}

/// `double 1.5`, `double -2.0e-01` or `double 0x3FF8000000000000`.
fn parse_double(arg: &str) -> std::result::Result<f64, String> {
    let lit = arg
        .trim()
        .strip_prefix("double")
        .map(str::trim)
        .ok_or_else(|| format!("syntax error: expected double operand, found '{arg}'"))?;
    let value = if let Some(hex) = lit.strip_prefix("0x").or_else(|| lit.strip_prefix("0X")) {
        if hex.len() != 16 {
            return Err(format!(
                "syntax error: malformed hexadecimal double '{lit}'"
            ));
        }
        u64::from_str_radix(hex, 16)
            .map(f64::from_bits)
            .map_err(|_| format!("syntax error: malformed hexadecimal double '{lit}'"))?
    } else {
        lit.parse::<f64>()
            .map_err(|_| format!("syntax error: malformed double literal '{lit}'"))?
    };
    if value.is_finite() {
        Ok(value)
    } else {
        Err(format!("non-finite rotation angle '{lit}'"))
    }
}
