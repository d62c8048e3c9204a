//! Executable backends: a seeded statevector simulator and a latency mock
//! that emulates remote devices.

mod backend;
pub mod rng;
mod statevector;

pub use backend::{
    run, sample_distribution, Backend, BackendConfig, LatencyMock, SamplingMode, StatevectorBackend,
};
pub use statevector::{
    estimate_output_size, exact_distribution, expectation_exact, simulate, StateVector,
};
