use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};

use super::terms::{OutcomeMode, QuasiTerm};
use super::variants::{Readout, VariantKey};
use crate::error::{Error, Result};
use crate::histogram::Histogram;
use crate::scalar::Scalar;

/// Estimate of one fragment's signed expectation with its per-run variance.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FragmentEstimate<T> {
    pub value: T,
    pub variance: T,
    pub shots: u64,
}

/// Reconstructed expectation value and its standard error.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Estimate<T> {
    pub value: T,
    pub sigma: T,
}

fn bit_sign(bits: &[u8], pos: usize) -> Result<i8> {
    match bits.get(pos) {
        Some(b'0') => Ok(1),
        Some(b'1') => Ok(-1),
        _ => Err(Error::invalid(format!("no bit at position {pos}"))),
    }
}

fn outcome_sign(bits: &str, readout: &Readout) -> Result<i8> {
    let bits = bits.as_bytes();
    let mut sign = 1i8;
    for &p in &readout.observables {
        sign *= bit_sign(bits, p)?;
    }
    if let Some((p, OutcomeMode::Eigenvalue)) = readout.cut_outcome {
        sign *= bit_sign(bits, p)?;
    }
    Ok(sign)
}

fn check_width(width: usize, readout: &Readout) -> Result<()> {
    if width != readout.width {
        return Err(Error::invalid(format!(
            "histogram width {width} does not match readout width {}",
            readout.width
        )));
    }
    Ok(())
}

/// Mean of the signed outcome and its variance `(1 - mean^2) / shots`.
pub fn fragment_estimate<T: Scalar>(
    histogram: &Histogram,
    readout: &Readout,
) -> Result<FragmentEstimate<T>> {
    check_width(histogram.width(), readout)?;
    let mut signed: i64 = 0;
    for (bits, &count) in histogram.counts() {
        signed += i64::from(outcome_sign(bits, readout)?) * count as i64;
    }
    let shots = histogram.shots();
    let n = T::from_count(shots);
    let value = T::from_f64_lossy(signed as f64) / n;
    let variance = ((T::one() - value * value) / n).max(T::zero());
    Ok(FragmentEstimate {
        value,
        variance,
        shots,
    })
}

/// Noise-free fragment value from an exact outcome distribution.
pub fn fragment_exact<T: Scalar>(
    distribution: &BTreeMap<String, T>,
    readout: &Readout,
) -> Result<FragmentEstimate<T>> {
    let mut value = T::zero();
    for (bits, &p) in distribution {
        check_width(bits.len(), readout)?;
        if outcome_sign(bits, readout)? > 0 {
            value += p;
        } else {
            value -= p;
        }
    }
    Ok(FragmentEstimate {
        value,
        variance: T::zero(),
        shots: 0,
    })
}

/// Fragment estimates addressed by `(fragment, k, s)`. Several keys may share
/// one entry; the gradient of the reconstruction is then accumulated on that
/// entry before propagating variance.
#[derive(Clone, Debug)]
pub struct EstimateTable<T> {
    cuts: usize,
    entries: Vec<FragmentEstimate<T>>,
    slots: HashMap<VariantKey, usize>,
}

impl<T: Scalar> EstimateTable<T> {
    pub fn new(cuts: usize) -> Result<Self> {
        if !(1..=super::MAX_CUTS).contains(&cuts) {
            return Err(Error::invalid(format!("unsupported cut count {cuts}")));
        }
        Ok(EstimateTable {
            cuts,
            entries: Vec::new(),
            slots: HashMap::new(),
        })
    }

    pub fn cuts(&self) -> usize {
        self.cuts
    }

    pub fn num_entries(&self) -> usize {
        self.entries.len()
    }

    pub fn insert(&mut self, key: VariantKey, estimate: FragmentEstimate<T>) -> usize {
        self.insert_shared([key], estimate)
    }

    /// Stores one estimate under several keys.
    pub fn insert_shared(
        &mut self,
        keys: impl IntoIterator<Item = VariantKey>,
        estimate: FragmentEstimate<T>,
    ) -> usize {
        let idx = self.entries.len();
        self.entries.push(estimate);
        for key in keys {
            self.slots.insert(key, idx);
        }
        idx
    }

    /// Looks up the full key, then the reduced key that drops the term index
    /// a fragment does not depend on (`s` for the first fragment, `k` for the
    /// last fragment of a two-cut plan).
    fn slot(&self, key: VariantKey) -> Result<usize> {
        if let Some(&i) = self.slots.get(&key) {
            return Ok(i);
        }
        let reduced = match (self.cuts, key.fragment) {
            (2, 0) => VariantKey { s: None, ..key },
            (2, 2) => VariantKey { k: None, ..key },
            _ => key,
        };
        self.slots
            .get(&reduced)
            .copied()
            .ok_or_else(|| Error::invalid(format!("missing estimate for {key}")))
    }

    pub fn get(&self, key: VariantKey) -> Result<&FragmentEstimate<T>> {
        Ok(&self.entries[self.slot(key)?])
    }
}

/// Walks every term tuple, calling `visit(weight, entry indices)`.
fn for_each_tuple<T: Scalar>(
    table: &EstimateTable<T>,
    terms: &[QuasiTerm<T>],
    mut visit: impl FnMut(T, &[usize]),
) -> Result<()> {
    let mut idx = Vec::with_capacity(3);
    match table.cuts {
        1 => {
            for (k, tk) in terms.iter().enumerate() {
                idx.clear();
                for f in 0..2 {
                    idx.push(table.slot(VariantKey::new(f, Some(k), None))?);
                }
                visit(tk.coefficient, &idx);
            }
        }
        _ => {
            for (k, tk) in terms.iter().enumerate() {
                for (s, ts) in terms.iter().enumerate() {
                    idx.clear();
                    for f in 0..3 {
                        idx.push(table.slot(VariantKey::new(f, Some(k), Some(s)))?);
                    }
                    visit(tk.coefficient * ts.coefficient, &idx);
                }
            }
        }
    }
    Ok(())
}

/// `sum_{k,s} c_k c_s A_k B_{k,s} C_s` together with its delta-method sigma.
pub fn reconstruct<T: Scalar>(
    table: &EstimateTable<T>,
    terms: &[QuasiTerm<T>],
) -> Result<Estimate<T>> {
    let mut value = T::zero();
    for_each_tuple(table, terms, |w, idx| {
        value += w * idx
            .iter()
            .map(|&i| table.entries[i].value)
            .fold(T::one(), |a, b| a * b);
    })?;
    let sigma = propagate_sigma(table, terms)?;
    Ok(Estimate { value, sigma })
}

/// First-order error propagation: `Var = sum_e (d value / d e)^2 Var(e)`,
/// treating distinct table entries as independent.
pub fn propagate_sigma<T: Scalar>(table: &EstimateTable<T>, terms: &[QuasiTerm<T>]) -> Result<T> {
    if let Some(e) = table.entries.iter().find(|e| e.variance < T::zero()) {
        return Err(Error::invalid(format!(
            "negative variance {} in estimate table",
            e.variance
        )));
    }
    let mut grad = vec![T::zero(); table.entries.len()];
    for_each_tuple(table, terms, |w, idx| {
        for (j, &i) in idx.iter().enumerate() {
            let others = idx
                .iter()
                .enumerate()
                .filter(|&(l, _)| l != j)
                .map(|(_, &o)| table.entries[o].value)
                .fold(T::one(), |a, b| a * b);
            grad[i] += w * others;
        }
    })?;
    let var: T = grad
        .iter()
        .zip(&table.entries)
        .map(|(&g, e)| g * g * e.variance)
        .sum();
    Ok(var.sqrt())
}
