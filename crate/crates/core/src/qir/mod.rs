//! Textual QIR (`.ll`) subset: straight-line base-profile entry points.
//!
//! The parser is a line scanner, not an LLVM IR parser. It understands the
//! entry function body, `@name = ... c"..."` string globals (for output
//! labels), attribute groups and the `; ModuleID` comment; everything else at
//! module level is skipped.

mod emit;
mod parse;

use std::fmt;

use serde::{Deserialize, Serialize};

pub use emit::emit_qir;
pub use parse::{parse_module, parse_qir, ParsedModule};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Severity {
    Error,
    Warning,
}

/// A parser message anchored to a 1-based source line.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Diagnostic {
    pub line: usize,
    pub severity: Severity,
    pub message: String,
}

impl Diagnostic {
    pub fn error(line: usize, message: impl Into<String>) -> Self {
        Diagnostic {
            line,
            severity: Severity::Error,
            message: message.into(),
        }
    }

    pub fn warning(line: usize, message: impl Into<String>) -> Self {
        Diagnostic {
            line,
            severity: Severity::Warning,
            message: message.into(),
        }
    }
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let sev = match self.severity {
            Severity::Error => "error",
            Severity::Warning => "warning",
        };
        write!(f, "line {}: {}: {}", self.line, sev, self.message)
    }
}

/// A QIR module in text form together with its entry-point name.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct QirModule {
    pub text: String,
    pub entry_name: String,
}

impl QirModule {
    /// Parses `text` and keeps it if it is inside the supported subset.
    pub fn from_text(text: impl Into<String>) -> crate::Result<Self> {
        let text = text.into();
        let parsed = parse_module(&text)?;
        Ok(QirModule {
            entry_name: parsed.entry_name,
            text,
        })
    }

    pub fn to_circuit(&self) -> crate::Result<crate::Circuit> {
        parse_qir(&self.text)
    }
}
