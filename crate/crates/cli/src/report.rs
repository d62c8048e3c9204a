//! Report rows and their JSON, CSV and table renderings.

use std::fmt;

use serde::{Deserialize, Serialize};

use qtask_runtime::TimingReport;

use crate::manifest::Format;

/// Variant circuit count, or `"no cut"` for an uncut run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum CutCircuits {
    Count(usize),
    NoCut(NoCut),
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum NoCut {
    #[serde(rename = "no cut")]
    NoCut,
}

impl CutCircuits {
    pub fn count(&self) -> Option<usize> {
        match self {
            CutCircuits::Count(c) => Some(*c),
            CutCircuits::NoCut(_) => None,
        }
    }
}

impl fmt::Display for CutCircuits {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CutCircuits::Count(c) => write!(f, "{c}"),
            CutCircuits::NoCut(_) => f.write_str("no cut"),
        }
    }
}

/// One experiment result. Values are stored already rounded so every
/// rendering carries the same numbers.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub backend: String,
    pub value: f64,
    pub sigma: f64,
    pub full_s: f64,
    pub create_s: f64,
    pub exec_post_s: f64,
    pub retrieve_s: f64,
    pub n: usize,
    pub cut_circuits: CutCircuits,
}

pub const COLUMNS: [&str; 9] = [
    "backend",
    "value",
    "sigma",
    "full_s",
    "create_s",
    "exec_post_s",
    "retrieve_s",
    "n",
    "cut_circuits",
];

const TABLE_HEADER: [&str; 9] = [
    "Backend Used",
    "<Z^n>",
    "sigma",
    "Full (s)",
    "Create (s)",
    "Exec+Post (s)",
    "Retrieve (s)",
    "n",
    "# Cut Circuits",
];

fn round(x: f64, places: i32) -> f64 {
    let scale = 10f64.powi(places);
    let r = (x * scale).round() / scale;
    if r == 0.0 {
        0.0
    } else {
        r
    }
}

impl ReportRow {
    pub fn new(
        backend: &str,
        value: f64,
        sigma: f64,
        timing: &TimingReport,
        n: usize,
        cut_circuits: CutCircuits,
    ) -> Self {
        ReportRow {
            backend: backend.to_owned(),
            value: round(value, 6),
            sigma: round(sigma, 6),
            full_s: round(timing.full, 4),
            create_s: round(timing.create, 4),
            exec_post_s: round(timing.exec_post, 4),
            retrieve_s: round(timing.retrieve, 4),
            n,
            cut_circuits,
        }
    }

    fn cells(&self) -> [String; 9] {
        [
            self.backend.clone(),
            format!("{:.6}", self.value),
            format!("{:.6}", self.sigma),
            format!("{:.4}", self.full_s),
            format!("{:.4}", self.create_s),
            format!("{:.4}", self.exec_post_s),
            format!("{:.4}", self.retrieve_s),
            self.n.to_string(),
            self.cut_circuits.to_string(),
        ]
    }

    pub fn render(&self, format: Format) -> String {
        match format {
            Format::Json => serde_json::to_string_pretty(self).expect("row serializes") + "\n",
            Format::Csv => {
                let mut w = csv::Writer::from_writer(Vec::new());
                w.write_record(COLUMNS).expect("in-memory write");
                w.write_record(self.cells()).expect("in-memory write");
                String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8 cells")
            }
            Format::Table => {
                let cells = self.cells();
                let widths: Vec<usize> = TABLE_HEADER
                    .iter()
                    .zip(&cells)
                    .map(|(h, c)| h.len().max(c.len()))
                    .collect();
                let line = |row: &[String]| {
                    let padded: Vec<String> = row
                        .iter()
                        .zip(&widths)
                        .map(|(c, w)| format!("{c:<w$}"))
                        .collect();
                    format!("| {} |\n", padded.join(" | "))
                };
                let header: Vec<String> = TABLE_HEADER.iter().map(|s| s.to_string()).collect();
                let rule: Vec<String> = widths.iter().map(|w| "-".repeat(*w)).collect();
                let mut out = line(&header);
                out += &line(&rule);
                out += &line(&cells);
                out
            }
        }
    }
}

/// Reads any rendering back into a row.
pub fn parse_report(text: &str, format: Format) -> Result<ReportRow, String> {
    let cells: Vec<String> = match format {
        Format::Json => return serde_json::from_str(text).map_err(|e| e.to_string()),
        Format::Csv => {
            let mut r = csv::Reader::from_reader(text.as_bytes());
            let header = r.headers().map_err(|e| e.to_string())?.clone();
            if header.iter().ne(COLUMNS) {
                return Err(format!("unexpected header {header:?}"));
            }
            let rec = r
                .records()
                .next()
                .ok_or("no data row")?
                .map_err(|e| e.to_string())?;
            rec.iter().map(str::to_owned).collect()
        }
        Format::Table => {
            let line = text.lines().nth(2).ok_or("no data row")?;
            line.trim()
                .trim_matches('|')
                .split(" | ")
                .map(|c| c.trim().to_owned())
                .collect()
        }
    };
    if cells.len() != COLUMNS.len() {
        return Err(format!(
            "expected {} cells, got {}",
            COLUMNS.len(),
            cells.len()
        ));
    }
    let num = |i: usize| {
        cells[i]
            .parse::<f64>()
            .map_err(|e| format!("{}: {e}", COLUMNS[i]))
    };
    Ok(ReportRow {
        backend: cells[0].clone(),
        value: num(1)?,
        sigma: num(2)?,
        full_s: num(3)?,
        create_s: num(4)?,
        exec_post_s: num(5)?,
        retrieve_s: num(6)?,
        n: cells[7].parse().map_err(|e| format!("n: {e}"))?,
        cut_circuits: match cells[8].as_str() {
            "no cut" => CutCircuits::NoCut(NoCut::NoCut),
            c => CutCircuits::Count(c.parse().map_err(|e| format!("cut_circuits: {e}"))?),
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(cut: CutCircuits) -> ReportRow {
        ReportRow {
            backend: "mock(sv):delay=0.5".into(),
            value: 0.9738,
            sigma: 0.038728,
            full_s: 12.5,
            create_s: 0.0012,
            exec_post_s: 12.3,
            retrieve_s: 0.0001,
            n: 20,
            cut_circuits: cut,
        }
    }

    #[test]
    fn formats_agree() {
        for cut in [CutCircuits::Count(192), CutCircuits::NoCut(NoCut::NoCut)] {
            let r = row(cut);
            for f in [Format::Json, Format::Csv, Format::Table] {
                assert_eq!(parse_report(&r.render(f), f).unwrap(), r, "{f:?}");
            }
        }
    }

    #[test]
    fn json_shape() {
        let v: serde_json::Value =
            serde_json::from_str(&row(CutCircuits::NoCut(NoCut::NoCut)).render(Format::Json))
                .unwrap();
        assert_eq!(v["cut_circuits"], "no cut");
        let keys: Vec<_> = v.as_object().unwrap().keys().cloned().collect();
        let mut cols = COLUMNS.map(String::from).to_vec();
        cols.sort();
        assert_eq!(keys, cols);
    }

    #[test]
    fn rounding() {
        assert_eq!(round(0.12345649, 6), 0.123456);
        assert_eq!(round(-1e-9, 6).to_string(), "0");
    }
}
