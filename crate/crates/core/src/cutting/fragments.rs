use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::terms::QuasiTerm;
use crate::circuit::{Circuit, Gate, PauliBasis, DEFAULT_MAX_QUBITS};
use crate::error::{Error, Result};

/// Largest number of cuts the variant naming scheme (`k`, `s`) supports.
pub const MAX_CUTS: usize = 2;

/// Wire-cut positions for a GHZ chain. Cutting at `p` severs the wire of
/// qubit `p` right after the CNOT that targets it.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "Vec<usize>", into = "Vec<usize>")]
pub struct CutPlan {
    positions: Vec<usize>,
}

impl CutPlan {
    pub fn new(positions: Vec<usize>) -> Result<Self> {
        if positions.is_empty() || positions.len() > MAX_CUTS {
            return Err(Error::invalid(format!(
                "a cut plan needs 1 to {MAX_CUTS} cut positions, got {}",
                positions.len()
            )));
        }
        if positions.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::invalid("cut positions must be strictly increasing"));
        }
        if positions[0] == 0 {
            return Err(Error::invalid(
                "cut position 0 is invalid: qubit 0 has no incoming CNOT",
            ));
        }
        Ok(CutPlan { positions })
    }

    pub fn positions(&self) -> &[usize] {
        &self.positions
    }

    pub fn num_cuts(&self) -> usize {
        self.positions.len()
    }

    pub fn num_fragments(&self) -> usize {
        self.positions.len() + 1
    }

    /// Checks the plan against an `n`-qubit chain: every position in `1..n`.
    pub fn check_for(&self, n: usize) -> Result<()> {
        if n > DEFAULT_MAX_QUBITS {
            return Err(Error::ResourceLimit(format!(
                "{n} qubits exceeds the {DEFAULT_MAX_QUBITS}-qubit bound"
            )));
        }
        if let Some(&p) = self.positions.iter().find(|&&p| p >= n) {
            return Err(Error::invalid(format!(
                "cut position {p} out of range for a {n}-qubit chain (valid: 1..={})",
                n.saturating_sub(1)
            )));
        }
        Ok(())
    }

    /// Fragment widths for an `n`-qubit chain.
    pub fn widths(&self, n: usize) -> Vec<usize> {
        let mut bounds = vec![0];
        bounds.extend(&self.positions);
        bounds.push(n - 1);
        bounds.windows(2).map(|w| w[1] - w[0] + 1).collect()
    }
}

impl TryFrom<Vec<usize>> for CutPlan {
    type Error = Error;
    fn try_from(v: Vec<usize>) -> Result<Self> {
        CutPlan::new(v)
    }
}

impl From<CutPlan> for Vec<usize> {
    fn from(p: CutPlan) -> Self {
        p.positions
    }
}

impl fmt::Display for CutPlan {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<_> = self.positions.iter().map(ToString::to_string).collect();
        f.write_str(&parts.join(","))
    }
}

impl FromStr for CutPlan {
    type Err = Error;

    /// Comma-separated positions, e.g. `1,2`.
    fn from_str(s: &str) -> Result<Self> {
        let positions = s
            .split(',')
            .map(|p| {
                p.trim()
                    .parse::<usize>()
                    .map_err(|_| Error::invalid(format!("bad cut position {p:?}")))
            })
            .collect::<Result<Vec<_>>>()?;
        CutPlan::new(positions)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FragmentRole {
    First,
    Middle,
    Last,
}

/// A sub-circuit template with an optional preparation slot (downstream
/// side of the previous cut) and an optional cut-measurement slot (upstream
/// side of the next cut).
#[derive(Clone, Debug, PartialEq)]
pub struct Fragment {
    pub index: usize,
    pub role: FragmentRole,
    /// Global qubit indices covered, in local order.
    pub global_qubits: Vec<usize>,
    /// Gates plus Z measurements of the observable qubits, labelled `y{i}`
    /// with the 1-based global index.
    pub template: Circuit,
    pub prep_slot: Option<usize>,
    /// Local qubit measured in the basis of the following cut, and its label.
    pub cut_slot: Option<(usize, String)>,
}

impl Fragment {
    pub fn width(&self) -> usize {
        self.global_qubits.len()
    }

    /// Number of observable (`y`) measurements.
    pub fn num_observables(&self) -> usize {
        self.template.num_measurements()
    }

    /// Fills the slots: `prep` sets the preparation from the preceding cut's
    /// term, `measure` sets the cut measurement basis from the following
    /// cut's term. The cut measurement is always last in measurement order.
    pub fn instantiate<T>(
        &self,
        name: String,
        prep: Option<&QuasiTerm<T>>,
        measure: Option<&QuasiTerm<T>>,
    ) -> Result<Circuit> {
        let mut c = self.template.clone();
        c.name = name;
        match (self.prep_slot, prep) {
            (Some(q), Some(t)) => {
                c.prepare(q, t.prep_state);
            }
            (None, None) => {}
            _ => {
                return Err(Error::invalid(format!(
                    "fragment {} preparation slot mismatch",
                    self.index
                )))
            }
        }
        match (&self.cut_slot, measure) {
            (Some((q, label)), Some(t)) => {
                // FixedPlusOne terms still measure Z; the sign is dropped later.
                c.measure(*q, t.measure_basis, label.clone());
            }
            (None, None) => {}
            _ => {
                return Err(Error::invalid(format!(
                    "fragment {} cut-measurement slot mismatch",
                    self.index
                )))
            }
        }
        Ok(c)
    }
}

fn cut_label(cut: usize) -> String {
    match cut {
        0 => "o_k".to_owned(),
        1 => "o_s".to_owned(),
        c => format!("o_{c}"),
    }
}

/// Splits the `n`-qubit GHZ chain at the plan's positions.
pub fn cut_ghz(n: usize, plan: &CutPlan) -> Result<Vec<Fragment>> {
    plan.check_for(n)?;
    let mut bounds = vec![0];
    bounds.extend(plan.positions());
    bounds.push(n - 1);
    let count = plan.num_fragments();

    let mut fragments = Vec::with_capacity(count);
    for f in 0..count {
        let (lo, hi) = (bounds[f], bounds[f + 1]);
        let width = hi - lo + 1;
        let role = match f {
            0 => FragmentRole::First,
            f if f + 1 == count => FragmentRole::Last,
            _ => FragmentRole::Middle,
        };
        let mut template = Circuit::new(format!("frag{f}"), width);
        if role == FragmentRole::First {
            template.gate(Gate::H(0));
        }
        for q in 0..width - 1 {
            template.gate(Gate::Cnot {
                control: q,
                target: q + 1,
            });
        }
        let observed = if role == FragmentRole::Last {
            width
        } else {
            width - 1
        };
        for q in 0..observed {
            template.measure(q, PauliBasis::Z, format!("y{}", lo + q + 1));
        }
        fragments.push(Fragment {
            index: f,
            role,
            global_qubits: (lo..=hi).collect(),
            template,
            prep_slot: (role != FragmentRole::First).then_some(0),
            cut_slot: (role != FragmentRole::Last).then(|| (width - 1, cut_label(f))),
        });
    }
    Ok(fragments)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn four_qubit_two_cuts() {
        let plan: CutPlan = "1,2".parse().unwrap();
        let frags = cut_ghz(4, &plan).unwrap();
        assert_eq!(frags.len(), 3);
        assert!(frags.iter().all(|f| f.width() == 2));
        assert_eq!(frags[0].role, FragmentRole::First);
        assert_eq!(frags[1].role, FragmentRole::Middle);
        assert_eq!(frags[2].role, FragmentRole::Last);
        assert_eq!(frags[0].prep_slot, None);
        assert_eq!(frags[2].cut_slot, None);
        let labels = |f: &Fragment| -> Vec<String> {
            f.template.measurements().map(|m| m.label.clone()).collect()
        };
        assert_eq!(labels(&frags[0]), ["y1"]);
        assert_eq!(labels(&frags[1]), ["y2"]);
        assert_eq!(labels(&frags[2]), ["y3", "y4"]);
    }

    #[test]
    fn twenty_qubit_widths() {
        let plan = CutPlan::new(vec![6, 13]).unwrap();
        let widths: Vec<_> = cut_ghz(20, &plan)
            .unwrap()
            .iter()
            .map(Fragment::width)
            .collect();
        assert_eq!(widths, [7, 8, 7]);
        assert_eq!(plan.widths(20), widths);
        let observed: usize = cut_ghz(20, &plan)
            .unwrap()
            .iter()
            .map(Fragment::num_observables)
            .sum();
        assert_eq!(observed, 20);
    }

    #[test]
    fn single_cut() {
        let plan = CutPlan::new(vec![1]).unwrap();
        let widths: Vec<_> = cut_ghz(4, &plan)
            .unwrap()
            .iter()
            .map(Fragment::width)
            .collect();
        assert_eq!(widths, [2, 3]);
    }

    #[test]
    fn invalid_plans() {
        assert!("0,2".parse::<CutPlan>().is_err());
        assert!("2,1".parse::<CutPlan>().is_err());
        assert!("1,1".parse::<CutPlan>().is_err());
        assert!("1,2,3".parse::<CutPlan>().is_err());
        assert!("".parse::<CutPlan>().is_err());
        assert!("a".parse::<CutPlan>().is_err());
        let plan: CutPlan = "1,5".parse().unwrap();
        assert!(cut_ghz(4, &plan).is_err());
        assert!(cut_ghz(6, &plan).is_ok());
    }

    #[test]
    fn last_position_gives_single_qubit_tail() {
        let plan: CutPlan = "1,2".parse().unwrap();
        let frags = cut_ghz(3, &plan).unwrap();
        assert_eq!(
            frags.iter().map(Fragment::width).collect::<Vec<_>>(),
            [2, 2, 1]
        );
        assert_eq!(frags[2].template.gates().count(), 0);
    }

    #[test]
    fn serde_as_list() {
        let plan: CutPlan = serde_json::from_str("[6,13]").unwrap();
        assert_eq!(plan.to_string(), "6,13");
        assert!(serde_json::from_str::<CutPlan>("[3,2]").is_err());
    }
}
