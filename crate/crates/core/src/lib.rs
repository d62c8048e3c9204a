//! Circuit model, QIR text I/O, statevector backends and wire cutting for a
//! task-based hybrid runtime.
//!
//! Numeric code is generic over [`Scalar`] (`f32` or `f64`); the aliases at
//! the crate root fix it to `f64`.

pub mod circuit;
pub mod cutting;
mod error;
pub mod histogram;
pub mod qir;
mod scalar;
pub mod sim;

pub use circuit::{ghz_circuit, parity, Circuit, Gate, Measurement, PauliBasis, PrepState};
pub use error::{Error, Result};
pub use histogram::Histogram;
pub use scalar::Scalar;

pub type StateVectorF64 = sim::StateVector<f64>;
pub type StateVectorF32 = sim::StateVector<f32>;
pub type EstimateF64 = cutting::Estimate<f64>;
pub type FragmentEstimateF64 = cutting::FragmentEstimate<f64>;
pub type EstimateTableF64 = cutting::EstimateTable<f64>;
pub type QuasiTermF64 = cutting::QuasiTerm<f64>;
