//! Wire cutting for GHZ chains: the eight-term identity decomposition,
//! fragment templates, variant enumeration and reconstruction.
mod estimate;
mod fragments;
mod terms;
mod variants;

pub use estimate::{
    fragment_estimate, fragment_exact, propagate_sigma, reconstruct, Estimate, EstimateTable,
    FragmentEstimate,
};
pub use fragments::{cut_ghz, CutPlan, Fragment, FragmentRole, MAX_CUTS};
pub use terms::{decomposition_terms, gamma, OutcomeMode, QuasiTerm, TERMS_PER_CUT};
pub use variants::{enumerate_variants, Readout, Variant, VariantKey, VariantUse};
