use serde::{Deserialize, Serialize};

use crate::circuit::{PauliBasis, PrepState};
use crate::scalar::Scalar;

/// Number of measure-and-prepare channels per cut wire.
pub const TERMS_PER_CUT: usize = 8;

/// How the cut-qubit outcome enters the estimator.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum OutcomeMode {
    /// Multiply by the +/-1 eigenvalue of the measured basis.
    Eigenvalue,
    /// The qubit is still measured (in Z) but its outcome is replaced by +1.
    FixedPlusOne,
}

/// One measure-and-prepare channel of the single-wire identity decomposition.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct QuasiTerm<T> {
    pub index: usize,
    pub coefficient: T,
    pub measure_basis: PauliBasis,
    pub outcome_mode: OutcomeMode,
    pub prep_state: PrepState,
}

/// The eight-term decomposition
///
/// `rho = 1/2 <X> (|+><+| - |-><-|) + 1/2 <Y> (|+i><+i| - |-i><-i|)
///      + 1/2 <Z> (|0><0| - |1><1|) + 1/2 (|0><0| + |1><1|)`
///
/// with `sum |c| = 4`.
pub fn decomposition_terms<T: Scalar>() -> [QuasiTerm<T>; TERMS_PER_CUT] {
    use OutcomeMode::*;
    use PauliBasis as B;
    use PrepState as P;
    let table = [
        (B::X, Eigenvalue, P::Plus, 0.5),
        (B::X, Eigenvalue, P::Minus, -0.5),
        (B::Y, Eigenvalue, P::PlusI, 0.5),
        (B::Y, Eigenvalue, P::MinusI, -0.5),
        (B::Z, Eigenvalue, P::Zero, 0.5),
        (B::Z, Eigenvalue, P::One, -0.5),
        (B::Z, FixedPlusOne, P::Zero, 0.5),
        (B::Z, FixedPlusOne, P::One, 0.5),
    ];
    std::array::from_fn(|i| {
        let (measure_basis, outcome_mode, prep_state, c) = table[i];
        QuasiTerm {
            index: i,
            coefficient: T::from_f64_lossy(c),
            measure_basis,
            outcome_mode,
            prep_state,
        }
    })
}

/// Sampling overhead `sum |c_k|` of a term set.
pub fn gamma<T: Scalar>(terms: &[QuasiTerm<T>]) -> T {
    terms.iter().map(|t| t.coefficient.abs()).sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn table_shape() {
        let terms = decomposition_terms::<f64>();
        assert_eq!(terms.len(), 8);
        assert_eq!(gamma(&terms), 4.0);
        assert_eq!(gamma(&decomposition_terms::<f32>()), 4.0);
        assert!(terms.iter().enumerate().all(|(i, t)| t.index == i));
        let fixed: Vec<_> = terms
            .iter()
            .filter(|t| t.outcome_mode == OutcomeMode::FixedPlusOne)
            .map(|t| t.index)
            .collect();
        assert_eq!(fixed, [6, 7]);
    }
}
