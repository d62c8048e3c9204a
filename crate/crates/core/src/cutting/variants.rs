use std::fmt;

use serde::{Deserialize, Serialize};

use super::fragments::Fragment;
use super::terms::{OutcomeMode, QuasiTerm};
use crate::circuit::Circuit;
use crate::error::{Error, Result};

/// Addresses one fragment evaluation: fragment index plus the term chosen
/// for the first cut (`k`) and, with two cuts, the second (`s`).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct VariantKey {
    pub fragment: usize,
    pub k: Option<usize>,
    pub s: Option<usize>,
}

impl VariantKey {
    pub fn new(fragment: usize, k: Option<usize>, s: Option<usize>) -> Self {
        VariantKey { fragment, k, s }
    }
}

impl fmt::Display for VariantKey {
    /// `frag{F}_k{K}_s{S}`, with `x` for an absent index.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let idx = |i: Option<usize>| i.map_or_else(|| "x".to_owned(), |i| i.to_string());
        write!(f, "frag{}_k{}_s{}", self.fragment, idx(self.k), idx(self.s))
    }
}

/// How to turn a fragment histogram into a +/-1 estimate.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Readout {
    pub width: usize,
    /// Bit positions of the observable qubits.
    pub observables: Vec<usize>,
    /// Bit position of the cut measurement, if any, and its mode.
    pub cut_outcome: Option<(usize, OutcomeMode)>,
}

/// A table slot served by a variant's histogram.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct VariantUse {
    pub key: VariantKey,
    pub readout: Readout,
}

/// One circuit to execute and the table slots its histogram fills.
#[derive(Clone, Debug)]
pub struct Variant {
    pub name: String,
    pub fragment: usize,
    pub circuit: Circuit,
    /// A single slot unless the variants were deduplicated.
    pub uses: Vec<VariantUse>,
}

impl Variant {
    pub fn keys(&self) -> impl Iterator<Item = VariantKey> + '_ {
        self.uses.iter().map(|u| u.key)
    }
}

fn readout_for<T>(fragment: &Fragment, measure: Option<&QuasiTerm<T>>) -> Readout {
    let observed = fragment.num_observables();
    Readout {
        width: observed + usize::from(measure.is_some()),
        observables: (0..observed).collect(),
        cut_outcome: measure.map(|t| (observed, t.outcome_mode)),
    }
}

fn same_structure(a: &Circuit, b: &Circuit) -> bool {
    a.num_qubits == b.num_qubits
        && a.preparations == b.preparations
        && a.instructions == b.instructions
}

/// Instantiates every fragment for every term tuple: `(c + 1) * 8^c`
/// circuits for `c` cuts, ordered by fragment, then `k`, then `s`.
///
/// With `dedup`, structurally identical circuits (ignoring the name) collapse
/// into one variant that serves all of their keys.
pub fn enumerate_variants<T>(
    fragments: &[Fragment],
    terms: &[QuasiTerm<T>],
    dedup: bool,
) -> Result<Vec<Variant>> {
    let cuts = fragments.len().saturating_sub(1);
    if cuts == 0 || cuts > super::MAX_CUTS {
        return Err(Error::invalid(format!(
            "expected 2 or 3 fragments, got {}",
            fragments.len()
        )));
    }
    if terms.is_empty() {
        return Err(Error::invalid("empty term table"));
    }
    let tuples: Vec<(usize, Option<usize>)> = if cuts == 1 {
        (0..terms.len()).map(|k| (k, None)).collect()
    } else {
        (0..terms.len())
            .flat_map(|k| (0..terms.len()).map(move |s| (k, Some(s))))
            .collect()
    };

    let mut variants: Vec<Variant> = Vec::new();
    for fragment in fragments {
        let f = fragment.index;
        let first_unique = variants.len();
        for &(k, s) in &tuples {
            let chosen = [Some(k), s];
            let prep = f.checked_sub(1).map(|c| &terms[chosen[c].unwrap()]);
            let measure = (f < cuts).then(|| &terms[chosen[f].unwrap()]);
            let key = VariantKey::new(f, Some(k), s);
            let circuit = fragment.instantiate(key.to_string(), prep, measure)?;
            let readout = readout_for(fragment, measure);
            let used = VariantUse { key, readout };
            if dedup {
                if let Some(v) = variants[first_unique..]
                    .iter_mut()
                    .find(|v| same_structure(&v.circuit, &circuit))
                {
                    v.uses.push(used);
                    continue;
                }
            }
            variants.push(Variant {
                name: key.to_string(),
                fragment: f,
                circuit,
                uses: vec![used],
            });
        }
    }
    Ok(variants)
}
